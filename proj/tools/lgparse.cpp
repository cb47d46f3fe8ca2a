// lgparse: annotate, train, parse, eval, xval, lexstats.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lgparse/lgparse.hpp"

namespace {

using namespace lgparse;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

/// Bad flag combination; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_file(const std::string& path) {
  const std::string data = read_file(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;

  json to_json(const CLI::App& sub) const {
    json flags = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
      if (name == "help") continue;
      if (opt->count() > 0) {
        const auto& res = opt->results();
        flags[name] = res.size() == 1 ? json(res.front()) : json(res);
      } else {
        flags[name] = opt->get_default_str();
      }
    }
    json in = json::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    json j = {{"tool", "lgparse"},   {"version", kVersion}, {"subcommand", subcommand},
              {"argv", argv},        {"flags", flags},      {"inputs", in},
              {"timestamp", utc_timestamp()}};
    j["seed"] = seed ? json(*seed) : json();
    return j;
  }

  void write(const CLI::App& sub, const std::string& artifact) const {
    std::ofstream out(artifact + ".manifest.json");
    if (!out) throw Error("cannot write manifest for " + artifact);
    out << to_json(sub).dump(1) << '\n';
  }
};

std::set<std::string> parse_tag_list(const std::string& s) {
  std::set<std::string> out;
  std::istringstream in(s);
  std::string tag;
  while (std::getline(in, tag, ','))
    if (!tag.empty()) out.insert(tag);
  return out;
}

// ---------------------------------------------------------------------------
// Strategy flags shared by annotate and xval

struct StrategyFlags {
  std::string lexicon;
  std::string hierarchy;
  std::string method;
  std::string category = "V";
  int level = 0;
  int max_amb = 1;
  std::string targets;
  std::vector<std::string> strategy_files;

  void add_to(CLI::App* sub) {
    sub->add_option("--lexicon", lexicon, "lexicon TSV (lemma, V|N, table)")->check(CLI::ExistingFile);
    sub->add_option("--hierarchy", hierarchy, "table hierarchy file")->check(CLI::ExistingFile);
    sub->add_option("--method", method, "table | hier | member")
        ->check(CLI::IsMember({"table", "hier", "member"}));
    sub->add_option("--category", category, "V | N")->check(CLI::IsMember({"V", "N"}))->capture_default_str();
    sub->add_option("--level", level, "hierarchy level")->capture_default_str();
    sub->add_option("--max-amb", max_amb, "maximum number of classes")->capture_default_str();
    sub->add_option("--targets", targets, "comma-separated target tags (default per category)");
    sub->add_option("--strategy", strategy_files,
                    "key=value strategy file (keys method, category, level, max_amb, targets, lexicon, "
                    "hierarchy); repeatable")
        ->check(CLI::ExistingFile);
  }
};

struct LoadedStrategies {
  std::vector<std::unique_ptr<Lexicon>> lexicons;
  std::vector<std::unique_ptr<Hierarchy>> hierarchies;
  std::vector<AnnotationStep> steps;
  std::vector<std::string> inputs;

  void add(const StrategyConfig& cfg, const std::string& lex_path, const std::string& hier_path,
           const std::string& origin) {
    if (lex_path.empty()) throw UsageError(origin + ": --lexicon is required");
    if (cfg.method == Method::Hierarchy && hier_path.empty())
      throw UsageError(origin + ": --hierarchy is required with --method hier");
    lexicons.push_back(std::make_unique<Lexicon>(load_lexicon(lex_path)));
    inputs.push_back(lex_path);
    const Hierarchy* h = nullptr;
    if (!hier_path.empty() && cfg.method == Method::Hierarchy) {
      hierarchies.push_back(std::make_unique<Hierarchy>(load_hierarchy(hier_path)));
      h = hierarchies.back().get();
      inputs.push_back(hier_path);
    }
    try {
      cfg.validate(h);
    } catch (const AnnotateError& e) {
      throw UsageError(origin + ": " + e.what());
    }
    steps.push_back(AnnotationStep{cfg, lexicons.back().get(), h});
  }
};

LoadedStrategies load_strategies(const StrategyFlags& f) {
  LoadedStrategies out;
  if (!f.method.empty()) {
    StrategyConfig cfg;
    cfg.method = *parse_method(f.method);
    cfg.category = *parse_category(f.category);
    cfg.level = f.level;
    cfg.max_ambiguity = f.max_amb;
    cfg.target_tags = f.targets.empty() ? default_target_tags(cfg.category) : parse_tag_list(f.targets);
    out.add(cfg, f.lexicon, f.hierarchy, "--method");
  } else if (!f.hierarchy.empty() || f.level != 0 || !f.targets.empty()) {
    throw UsageError("--method is required when strategy flags are given");
  }
  for (const auto& path : f.strategy_files) {
    std::map<std::string, std::string> extra;
    StrategyConfig cfg;
    try {
      cfg = parse_strategy_kv(read_file(path), &extra);
    } catch (const AnnotateError& e) {
      throw UsageError("--strategy " + path + ": " + e.what());
    }
    for (const auto& [k, v] : extra)
      if (k != "lexicon" && k != "hierarchy") throw UsageError("--strategy " + path + ": unknown key '" + k + "'");
    const std::string lex = extra.count("lexicon") ? extra["lexicon"] : f.lexicon;
    const std::string hier = extra.count("hierarchy") ? extra["hierarchy"] : f.hierarchy;
    out.add(cfg, lex, hier, "--strategy " + path);
    out.inputs.push_back(path);
  }
  try {
    check_disjoint_targets(out.steps);
  } catch (const AnnotateError& e) {
    throw UsageError(e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training flags shared by train and xval

struct TrainFlags {
  TrainConfig cfg;

  void add_to(CLI::App* sub) {
    sub->add_option("--rounds", cfg.rounds, "split/EM rounds (0: plain PCFG)")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--em-iters", cfg.em_iters, "EM iterations per round")->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--noise", cfg.noise, "split perturbation in [0, 0.5)")->check(CLI::Range(0.0, 0.4999999))
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "split noise seed")->capture_default_str();
    sub->add_option("--rare-threshold", cfg.rare_threshold, "words seen fewer times become signatures")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    sub->add_option("--h-markov", cfg.h_markov, "horizontal markovization")->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--v-markov", cfg.v_markov, "vertical markovization")->check(CLI::PositiveNumber)
        ->capture_default_str();
  }
};

struct EvalFlags {
  int max_len = 40;
  std::string punct = "include";
  std::string punct_prefix = "PONCT";

  void add_to(CLI::App* sub) {
    sub->add_option("--max-len", max_len, "score sentences with at most this many tokens")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--punct", punct, "include | exclude")->check(CLI::IsMember({"include", "exclude"}))
        ->capture_default_str();
    sub->add_option("--punct-prefix", punct_prefix, "punctuation tag prefix")->capture_default_str();
  }
  EvalOptions options() const {
    EvalOptions o;
    o.max_len = max_len;
    o.include_punct = punct == "include";
    o.punct_prefix = punct_prefix;
    return o;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_annotate(const CLI::App& sub, const std::string& treebank, const StrategyFlags& sf, const std::string& out,
                 Manifest m) {
  if (sf.method.empty() && sf.strategy_files.empty()) throw UsageError("--method or --strategy is required");
  auto strategies = load_strategies(sf);
  const Treebank tb = load_treebank(treebank);
  m.inputs.push_back(treebank);
  m.inputs.insert(m.inputs.end(), strategies.inputs.begin(), strategies.inputs.end());

  Treebank cur = tb;
  for (const auto& step : strategies.steps) {
    Treebank next = annotate(cur, step);
    const auto cov = coverage(cur, next, step.config.target_tags);
    std::cout << method_display_name(step.config.method) << ' ' << step.config.level_amb_label()
              << ": annotated " << cov.n_annotated_forms << '/' << cov.n_distinct_forms << " forms ("
              << std::fixed << std::setprecision(2) << cov.pct_annotated << "%), tagset "
              << cov.tagset_size_before << " -> " << cov.tagset_size_after << '\n';
    cur = std::move(next);
  }
  save_treebank(cur, out);
  m.write(sub, out);
  return 0;
}

int cmd_train(const CLI::App& sub, const std::string& treebank, const TrainConfig& cfg, const std::string& out,
              Manifest m) {
  const Treebank tb = load_treebank(treebank);
  m.inputs.push_back(treebank);
  m.seed = cfg.seed;
  std::cout << std::setprecision(10);
  auto [g, trace] = train_latent(tb, cfg, [](const TrainingRecord& r) {
    std::cout << "iter " << r.iteration << " rounds " << r.n_split_rounds << " loglik " << r.log_likelihood << '\n';
  });
  save_grammar_file(g, out);
  std::cout << "symbols " << g.n_symbols() << " split " << g.n_split_symbols() << " rules "
            << g.binary().size() + g.unary().size() + g.lexical().size() << '\n';
  m.write(sub, out);
  return 0;
}

int cmd_parse(const CLI::App& sub, const std::string& grammar, const std::string& input, const std::string& treebank,
              const std::string& out, int max_chain, int jobs, Manifest m) {
  if (input.empty() == treebank.empty()) throw UsageError("exactly one of --input or --treebank is required");
  const Grammar g = load_grammar_file(grammar);
  m.inputs.push_back(grammar);
  std::vector<std::vector<Token>> sentences;
  if (!treebank.empty()) {
    for (const auto& t : load_treebank(treebank).trees) sentences.push_back(tokens_of(t));
    m.inputs.push_back(treebank);
  } else {
    std::istringstream in(read_file(input));
    std::string line;
    while (std::getline(in, line)) {
      auto toks = parse_token_line(line);
      if (!toks.empty()) sentences.push_back(std::move(toks));
    }
    m.inputs.push_back(input);
  }
  ParserOptions strict_opt;
  strict_opt.max_unary_chain = max_chain;
  ParserOptions relaxed_opt = strict_opt;
  relaxed_opt.relax_unknown = true;
  const Parser strict(g, strict_opt), relaxed(g, relaxed_opt);
  std::vector<ParseOutcome> outcomes(sentences.size());
  detail::run_chunks(sentences.size(), jobs,
                     [&](std::size_t i) { outcomes[i] = parse_with_fallback(strict, relaxed, sentences[i]); });
  Treebank result;
  std::size_t n_relaxed = 0, n_fallback = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].status == ParseStatus::Relaxed) ++n_relaxed;
    if (outcomes[i].status == ParseStatus::Fallback) {
      ++n_fallback;
      std::cerr << "sentence " << i + 1 << ": no parse, flat fallback\n";
    }
    result.trees.push_back(std::move(outcomes[i].tree));
  }
  save_treebank(result, out);
  m.write(sub, out);
  std::cerr << "parsed " << sentences.size() << " relaxed " << n_relaxed << " fallback " << n_fallback << '\n';
  if (!sentences.empty() && n_fallback == sentences.size()) {
    std::cerr << "error: no sentence could be parsed\n";
    return 1;
  }
  return 0;
}

json score_json(const ParsevalScore& s, const EvalOptions& o) {
  json j = to_json(s);
  j["max_len"] = o.max_len;
  j["max_len_inclusive"] = o.max_len_inclusive;
  j["include_punct"] = o.include_punct;
  return j;
}

int cmd_eval(const CLI::App& sub, const std::string& gold_path, const std::string& pred_path,
             const std::string& strip_tags, const EvalFlags& ef, const std::string& out, Manifest m) {
  const Treebank gold = load_treebank(gold_path);
  Treebank pred = load_treebank(pred_path);
  m.inputs = {gold_path, pred_path};
  if (!strip_tags.empty()) pred = strip(pred, parse_tag_list(strip_tags));
  const EvalOptions o = ef.options();
  const ParsevalScore s = parseval(gold, pred, o);
  std::cout << std::fixed << std::setprecision(2) << "P " << s.precision << " R " << s.recall << " F " << s.f1
            << " Tag " << s.tagging_accuracy << '\n'
            << "gold " << s.n_gold << " pred " << s.n_pred << " match " << s.n_match << " scored "
            << s.n_sentences_scored << " excluded " << s.n_excluded_by_length << " (max_len " << o.max_len
            << " inclusive, punct " << ef.punct << ")\n";
  if (!out.empty()) {
    write_text(out, score_json(s, o).dump(1) + "\n");
    m.write(sub, out);
  }
  return 0;
}

int cmd_xval(const CLI::App& sub, const std::string& treebank, const StrategyFlags& sf, const TrainConfig& tc,
             const EvalFlags& ef, int p, std::int64_t fold_seed, int max_chain, const std::string& baseline_path,
             const std::string& out, int jobs, Manifest m) {
  auto strategies = load_strategies(sf);
  const Treebank tb = load_treebank(treebank);
  m.inputs.push_back(treebank);
  m.inputs.insert(m.inputs.end(), strategies.inputs.begin(), strategies.inputs.end());
  m.seed = tc.seed;
  if (static_cast<std::size_t>(p) > tb.size())
    throw UsageError("--p " + std::to_string(p) + " exceeds the number of trees (" + std::to_string(tb.size()) + ")");

  std::optional<ExperimentReport> baseline;
  if (!baseline_path.empty()) {
    baseline = report_from_json(json::parse(read_file(baseline_path)));
    m.inputs.push_back(baseline_path);
  }
  XvalConfig xc;
  xc.p = p;
  xc.fold_seed = fold_seed;
  xc.eval = ef.options();
  xc.parser.max_unary_chain = max_chain;
  xc.jobs = jobs;
  const ExperimentReport r = cross_validate(tb, strategies.steps, tc, xc, baseline ? &*baseline : nullptr);
  const std::string text = format_report(r);
  std::cout << text;
  write_text(out + ".txt", text);
  write_text(out + ".json", to_json(r).dump(1) + "\n");
  m.write(sub, out);
  if (r.n_fallback > 0 && r.n_fallback == tb.size()) {
    std::cerr << "error: every sentence fell back to a flat tree\n";
    return 1;
  }
  return 0;
}

int cmd_lexstats(const CLI::App& sub, const std::string& lexicon, const std::string& hierarchy,
                 const std::string& out, Manifest m) {
  const Lexicon lex = load_lexicon(lexicon);
  const Hierarchy h = load_hierarchy(hierarchy);
  m.inputs = {lexicon, hierarchy};
  json rows = json::array();
  std::cout << std::left << std::setw(7) << "Level" << std::setw(10) << "#classes" << std::setw(8) << "#forms"
            << std::setw(10) << "#entries" << std::setw(10) << "AVG_1" << "AVG_2\n";
  for (int k = 0; k < h.n_levels(); ++k) {
    const auto s = hierarchy_stats(lex, h, k);
    std::cout << std::left << std::setw(7) << k << std::setw(10) << s.n_classes << std::setw(8) << s.n_forms
              << std::setw(10) << s.n_entries << std::setw(10) << std::fixed << std::setprecision(2) << s.avg1
              << s.avg2 << '\n';
    rows.push_back({{"level", k},
                    {"n_classes", s.n_classes},
                    {"n_forms", s.n_forms},
                    {"n_entries", s.n_entries},
                    {"avg1", s.avg1},
                    {"avg2", s.avg2}});
  }
  if (!out.empty()) {
    write_text(out, rows.dump(1) + "\n");
    m.write(sub, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lexicon-Grammar tagset refinement for latent PCFG parsing"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "INI/TOML file of option defaults; command-line flags win");
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  Manifest manifest;
  manifest.argv.assign(argv, argv + argc);

  // annotate
  auto* annotate_cmd = app.add_subcommand("annotate", "rewrite pre-terminal tags with lexicon classes");
  std::string a_treebank, a_out;
  StrategyFlags a_strategy;
  annotate_cmd->add_option("--treebank", a_treebank, "bracketed treebank")->required()->check(CLI::ExistingFile);
  annotate_cmd->add_option("--out", a_out, "annotated treebank")->required();
  a_strategy.add_to(annotate_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a latent-annotation PCFG");
  std::string t_treebank, t_out;
  TrainFlags t_flags;
  train_cmd->add_option("--treebank", t_treebank, "bracketed treebank")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", t_out, "grammar file")->required();
  t_flags.add_to(train_cmd);

  // parse
  auto* parse_cmd = app.add_subcommand("parse", "CKY Viterbi parsing");
  std::string p_grammar, p_input, p_treebank, p_out;
  int p_chain = 2;
  parse_cmd->add_option("--grammar", p_grammar, "grammar file")->required()->check(CLI::ExistingFile);
  parse_cmd->add_option("--input", p_input, "one sentence per line, tokens surface or surface##lemma")
      ->check(CLI::ExistingFile);
  parse_cmd->add_option("--treebank", p_treebank, "take the token sequences of a treebank")->check(CLI::ExistingFile);
  parse_cmd->add_option("--out", p_out, "bracketed output")->required();
  parse_cmd->add_option("--max-unary-chain", p_chain, "unary rules per chart cell")->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "PARSEVAL scoring of a predicted treebank");
  std::string e_gold, e_pred, e_strip, e_out;
  EvalFlags e_flags;
  eval_cmd->add_option("--gold", e_gold, "gold treebank")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", e_pred, "predicted treebank")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--strip", e_strip, "comma-separated base tags whose refinements are removed from --pred");
  eval_cmd->add_option("--out", e_out, "JSON score file");
  e_flags.add_to(eval_cmd);

  // xval
  auto* xval_cmd = app.add_subcommand("xval", "p-fold cross-validation experiment");
  std::string x_treebank, x_baseline, x_out;
  StrategyFlags x_strategy;
  TrainFlags x_train;
  EvalFlags x_eval;
  int x_p = 10;
  std::int64_t x_fold_seed = 0;
  int x_chain = 2;
  xval_cmd->add_option("--treebank", x_treebank, "bracketed treebank")->required()->check(CLI::ExistingFile);
  xval_cmd->add_option("--out", x_out, "report prefix (.txt, .json, .manifest.json)")->required();
  xval_cmd->add_option("--p", x_p, "number of folds")->check(CLI::Range(2, 1 << 30))->capture_default_str();
  xval_cmd->add_option("--fold-seed", x_fold_seed, "fold shuffle seed; negative keeps corpus order")
      ->capture_default_str();
  xval_cmd->add_option("--baseline-report", x_baseline, "baseline JSON report for gain columns")
      ->check(CLI::ExistingFile);
  xval_cmd->add_option("--max-unary-chain", x_chain, "unary rules per chart cell")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  x_strategy.add_to(xval_cmd);
  x_train.add_to(xval_cmd);
  x_eval.add_to(xval_cmd);

  // lexstats
  auto* lexstats_cmd = app.add_subcommand("lexstats", "per-level hierarchy statistics");
  std::string l_lexicon, l_hierarchy, l_out;
  lexstats_cmd->add_option("--lexicon", l_lexicon, "lexicon TSV")->required()->check(CLI::ExistingFile);
  lexstats_cmd->add_option("--hierarchy", l_hierarchy, "hierarchy file")->required()->check(CLI::ExistingFile);
  lexstats_cmd->add_option("--out", l_out, "JSON statistics file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*annotate_cmd) {
      manifest.subcommand = "annotate";
      return cmd_annotate(*annotate_cmd, a_treebank, a_strategy, a_out, manifest);
    }
    if (*train_cmd) {
      manifest.subcommand = "train";
      TrainConfig cfg = t_flags.cfg;
      cfg.jobs = jobs;
      return cmd_train(*train_cmd, t_treebank, cfg, t_out, manifest);
    }
    if (*parse_cmd) {
      manifest.subcommand = "parse";
      return cmd_parse(*parse_cmd, p_grammar, p_input, p_treebank, p_out, p_chain, jobs, manifest);
    }
    if (*eval_cmd) {
      manifest.subcommand = "eval";
      return cmd_eval(*eval_cmd, e_gold, e_pred, e_strip, e_flags, e_out, manifest);
    }
    if (*xval_cmd) {
      manifest.subcommand = "xval";
      TrainConfig cfg = x_train.cfg;
      cfg.jobs = jobs;
      return cmd_xval(*xval_cmd, x_treebank, x_strategy, cfg, x_eval, x_p, x_fold_seed, x_chain, x_baseline, x_out,
                      jobs, manifest);
    }
    if (*lexstats_cmd) {
      manifest.subcommand = "lexstats";
      return cmd_lexstats(*lexstats_cmd, l_lexicon, l_hierarchy, l_out, manifest);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const FoldError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const AnnotateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == AnnotateErrorKind::InvalidConfig || e.kind() == AnnotateErrorKind::MissingHierarchy ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
