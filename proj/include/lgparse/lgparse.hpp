#pragma once

#include "lgparse/error.hpp"
#include "lgparse/tree.hpp"
#include "lgparse/folds.hpp"
#include "lgparse/lexicon.hpp"
#include "lgparse/annotate.hpp"
#include "lgparse/binarize.hpp"
#include "lgparse/grammar.hpp"
#include "lgparse/train.hpp"
#include "lgparse/parser.hpp"
#include "lgparse/parseval.hpp"
#include "lgparse/experiment.hpp"
