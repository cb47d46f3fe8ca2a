#include <gtest/gtest.h>

#include "lgparse/binarize.hpp"
#include "support/synthetic.hpp"

using namespace lgparse;

namespace {
bool all_binary(const Tree& t) {
  if (t.children.size() > 2) return false;
  for (const auto& c : t.children)
    if (!all_binary(c)) return false;
  return true;
}
}  // namespace

TEST(Binarize, RightFactoredWithHorizontalContext) {
  const Tree t = parse_tree("(NP (DET le) (NC chat) (ADJ noir) (PP (P de) (NPP Paris)))");
  EXPECT_EQ(to_string(binarize(t, 2, 1)),
            "(NP (DET le) (@NP|NC|ADJ (NC chat) (@NP|ADJ|PP (ADJ noir) (PP (P de) (NPP Paris)))))");
  EXPECT_EQ(to_string(binarize(t, 1, 1)),
            "(NP (DET le) (@NP|NC (NC chat) (@NP|ADJ (ADJ noir) (PP (P de) (NPP Paris)))))");
}

TEST(Binarize, VerticalContext) {
  const Tree t = parse_tree("(SENT (NP (DET le) (NC chat)) (VN (V dort)) (PONCT .))");
  EXPECT_EQ(to_string(binarize(t, 2, 2)),
            "(SENT (NP^SENT (DET le) (NC chat)) (@SENT|VN|PONCT (VN^SENT (V dort)) (PONCT .)))");
  EXPECT_EQ(to_string(binarize(parse_tree("(A (B (C (X x) (Y y))))"), 2, 3)), "(A (B^A (C^B^A (X x) (Y y))))");
}

TEST(Binarize, SmallNodesUntouched) {
  const Tree t = parse_tree("(SENT (NP (NPP Marie)) (VN (V dort)))");
  EXPECT_EQ(binarize(t), t);
}

TEST(Binarize, RoundTripRandom) {
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 240; ++seed) {
    const Treebank tb = lgtest::random_treebank(seed, 2, 5);
    const int h = 1 + static_cast<int>(seed % 3);
    const int v = 1 + static_cast<int>((seed / 3) % 3);
    for (const auto& t : tb.trees) {
      const Tree b = binarize(t, h, v);
      ASSERT_TRUE(all_binary(b)) << to_string(b);
      ASSERT_EQ(unbinarize(b), t) << to_string(t);
      ++cases;
    }
  }
  EXPECT_GE(cases, 200);
}

TEST(Binarize, MalformedIntermediates) {
  EXPECT_THROW(unbinarize(parse_tree("(@NP|X (A a) (B b))")), BinarizeError);
  EXPECT_THROW(unbinarize(parse_tree("(NP (@NP|X a))")), BinarizeError);
  EXPECT_TRUE(is_intermediate_label("@NP|DET"));
  EXPECT_FALSE(is_intermediate_label("NP"));
}
