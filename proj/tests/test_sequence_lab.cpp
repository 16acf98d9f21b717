#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "errstruct/config.hpp"
#include "errstruct/sequence_lab.hpp"
#include "errstruct/summation.hpp"
#include "support/generators.hpp"

using namespace errstruct;
namespace gen = errstruct::testing;

namespace {

BitSequence bits(const std::string& s) { return parse_ascii_bits(s); }

double mean(const BitSequence& s) {
  std::size_t ones = 0;
  for (auto b : s.bits) ones += b;
  return static_cast<double>(ones) / static_cast<double>(s.size());
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("errstruct_test_" + name);
}

}  // namespace

TEST(Champernowne, DisplayedPrefix) {
  EXPECT_EQ(to_ascii_bits(champernowne_bits(17)), "01101110010111011");
  EXPECT_EQ(to_ascii_bits(champernowne_bits(1)), "0");
  EXPECT_EQ(to_ascii_bits(champernowne_bits(3)), "011");
  EXPECT_EQ(champernowne_bits(5).provenance.generator, "champernowne");
  EXPECT_THROW(champernowne_bits(0), PreconditionError);
}

TEST(Champernowne, PrefixProperty) {
  const BitSequence big = champernowne_bits(5000);
  for (std::size_t n : {1, 2, 7, 100, 4999}) {
    const BitSequence small = champernowne_bits(n);
    EXPECT_TRUE(std::equal(small.bits.begin(), small.bits.end(), big.bits.begin()));
  }
}

TEST(Champernowne, MillionBitFrequencies) {
  const BitSequence s = champernowne_bits(1000000);
  EXPECT_LT(std::abs(block_frequencies(s, 1)[1] - 0.5), 0.05);
  const auto r = normality_report(s, 3);
  EXPECT_LT(r.rows[2].max_deviation, 0.03);
  EXPECT_FALSE(r.low_power);
}

TEST(PrngBits, ReproducibleAndBalanced) {
  EXPECT_EQ(prng_bits(1000, 3).bits, prng_bits(1000, 3).bits);
  EXPECT_NE(prng_bits(1000, 3).bits, prng_bits(1000, 4).bits);
  EXPECT_THROW(prng_bits(0, 3), PreconditionError);
  const BitSequence s = prng_bits(1000000, 0);
  EXPECT_LT(std::abs(mean(s) - 0.5), 4.0 / std::sqrt(4e6) * 2);
  EXPECT_EQ(s.provenance.seed, std::optional<std::uint64_t>(0));
}

TEST(BlockFrequencies, SmallCases) {
  const auto f1 = block_frequencies(bits("0101"), 1);
  EXPECT_EQ(f1, (std::vector<double>{0.5, 0.5}));
  const auto f2 = block_frequencies(bits("0101"), 2);
  EXPECT_DOUBLE_EQ(f2[0b01], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f2[0b10], 1.0 / 3.0);
  EXPECT_EQ(f2[0b00], 0.0);
  EXPECT_EQ(f2[0b11], 0.0);
  EXPECT_EQ(block_label(0b01, 2), "01");
  EXPECT_THROW(block_frequencies(bits("01"), 3), PreconditionError);
  EXPECT_THROW(block_frequencies(bits("01"), 0), PreconditionError);
  EXPECT_THROW(block_frequencies(bits("01"), 25), PreconditionError);
}

TEST(BlockFrequencies, SumToOne) {
  const BitSequence s = prng_bits(5000, 8);
  for (unsigned k = 1; k <= 10; ++k) {
    const auto f = block_frequencies(s, k);
    CompensatedSum total;
    for (double v : f) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      total.add(v);
    }
    EXPECT_NEAR(total.value(), 1.0, 1e-12);
  }
}

TEST(Normality, ZerosAndAlternating) {
  const auto zeros = normality_report(bits(std::string(100, '0')), 1);
  EXPECT_EQ(zeros.rows[0].max_deviation, 0.5);
  EXPECT_EQ(zeros.rows[0].degrees_of_freedom, 1u);
  std::string alt;
  for (int i = 0; i < 1000; ++i) alt += (i % 2 ? '1' : '0');
  const auto r = normality_report(bits(alt), 2);
  EXPECT_NEAR(r.rows[0].max_deviation, 0.0, 1e-12);
  EXPECT_NEAR(r.rows[1].max_deviation, 0.25, 1e-3);
  EXPECT_EQ(r.rows[1].degrees_of_freedom, 3u);
  EXPECT_FALSE(r.low_power);
  EXPECT_TRUE(normality_report(bits(alt), 8).low_power);
}

TEST(Selection, NamedRules) {
  const BitSequence s = bits("1101");
  EXPECT_EQ(select_subsequence(s, SelectionRule::all()).bits, s.bits);
  EXPECT_EQ(to_ascii_bits(select_subsequence(s, SelectionRule::after_one())), "10");
  EXPECT_EQ(selection_mask(s, SelectionRule::after_one()), (std::vector<bool>{false, true, true, false}));
}

TEST(Selection, RejectsMalformedMachines) {
  EXPECT_THROW(SelectionRule({{0, 2}}, {true}), PreconditionError);
  EXPECT_THROW(SelectionRule({{0, 0}}, {true, false}), PreconditionError);
  EXPECT_THROW(SelectionRule({{0, 0}}, {true}, 1), PreconditionError);
  EXPECT_THROW(BettingStrategy({{0, 0}}, {Bet{1.5, 1}}), PreconditionError);
  EXPECT_THROW(BettingStrategy({{0, 0}}, {Bet{0.5, 2}}), PreconditionError);
}

TEST(Selection, PartitionAndNonAnticipation) {
  gen::Rng rng(12);
  const BitSequence s = prng_bits(2000, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const SelectionRule rule = gen::random_rule(rng);
    const auto mask = selection_mask(s, rule);
    const BitSequence sub = select_subsequence(s, rule);
    EXPECT_LE(sub.size(), s.size());
    std::size_t selected = 0;
    for (bool m : mask) selected += m;
    EXPECT_EQ(selected, sub.size());
    // Decisions computed from prefixes alone match, whatever follows.
    for (std::size_t n : {0, 1, 17, 500, 1999}) {
      BitSequence prefix;
      prefix.bits.assign(s.bits.begin(), s.bits.begin() + static_cast<std::ptrdiff_t>(n));
      prefix.bits.push_back(static_cast<std::uint8_t>(1 - s.bits[n]));  // altered present bit
      EXPECT_EQ(selection_mask(prefix, rule)[n], mask[n]);
    }
  }
}

TEST(Martingale, ZeroStakeAndDoubling) {
  const auto flat = martingale_capital(prng_bits(50, 1), BettingStrategy::constant(0.0, 1), 3.0);
  for (double c : flat) EXPECT_EQ(c, 3.0);
  EXPECT_EQ(martingale_capital(bits("111"), BettingStrategy::constant(1.0, 1), 1.0),
            (std::vector<double>{2, 4, 8}));
  EXPECT_EQ(martingale_capital(bits("10"), BettingStrategy::constant(1.0, 1), 1.0),
            (std::vector<double>{2, 0}));
  EXPECT_THROW(martingale_capital(bits("1"), BettingStrategy::constant(0.5, 1), 0.0), PreconditionError);
}

TEST(Martingale, ExhaustiveEnumerationIsFair) {
  gen::Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const BettingStrategy st = gen::random_strategy(rng);
    const std::size_t length = 1 + gen::pick(rng, 12);
    CompensatedSum total;
    for (std::uint64_t v = 0; v < (1ull << length); ++v) {
      total.add(martingale_capital(gen::bits_of(v, length), st, 1.0).back());
    }
    EXPECT_NEAR(total.value() / static_cast<double>(1ull << length), 1.0, 1e-12);
  }
}

TEST(Martingale, NonAnticipation) {
  gen::Rng rng(5);
  const BitSequence s = prng_bits(300, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const BettingStrategy st = gen::random_strategy(rng);
    const auto full = martingale_capital(s, st, 1.0);
    for (std::size_t n : {0, 10, 150, 299}) {
      BitSequence prefix;
      prefix.bits.assign(s.bits.begin(), s.bits.begin() + static_cast<std::ptrdiff_t>(n + 1));
      EXPECT_EQ(martingale_capital(prefix, st, 1.0).back(), full[n]);
    }
  }
}

TEST(Martingale, EnsembleIsReproducibleAcrossWorkers) {
  const BettingStrategy st({{0, 1}, {0, 1}}, {Bet{0.02, 0}, Bet{0.02, 1}}, 0, "follow");
  const EnsembleResult a = martingale_ensemble(st, 1.0, 5000, 200, 11, 1);
  const EnsembleResult b = martingale_ensemble(st, 1.0, 5000, 200, 11, 4);
  EXPECT_EQ(a.mean_final, b.mean_final);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_LE(std::abs(a.mean_final - 1.0), 3 * a.std_error);
}

TEST(Lil, Examples) {
  EXPECT_GT(lil_statistic(bits(std::string(10000, '0')), 10), 10.0);
  std::string alt;
  for (int i = 0; i < 10000; ++i) alt += (i % 2 ? '0' : '1');
  EXPECT_LT(lil_statistic(bits(alt), 10), 0.5);
  EXPECT_THROW(lil_statistic(bits("0101"), 10), PreconditionError);
  EXPECT_THROW(lil_statistic(bits(alt), 5), PreconditionError);
  EXPECT_GT(lil_statistic(prng_bits(100000, 0), 10), 0.0);
}

TEST(Io, AsciiAndPackedRoundTrip) {
  const BitSequence s = prng_bits(1003, 6);
  const auto a = temp_file("ascii.txt");
  write_ascii_bits(a, s);
  EXPECT_EQ(read_ascii_bits(a).bits, s.bits);
  const auto p = temp_file("packed.bin");
  write_packed_bits(p, s);
  EXPECT_EQ(std::filesystem::file_size(p), 126u);
  EXPECT_EQ(read_packed_bits(p, 1003).bits, s.bits);
  EXPECT_EQ(read_packed_bits(p).size(), 1008u);
  EXPECT_THROW(read_packed_bits(p, 2000), PreconditionError);
  std::filesystem::remove(a);
  std::filesystem::remove(p);
  EXPECT_THROW(read_ascii_bits(temp_file("missing")), DomainError);
  EXPECT_EQ(parse_ascii_bits("01\n1 0\n").size(), 4u);
  EXPECT_THROW(parse_ascii_bits("012"), ParseError);
}

TEST(Io, PackedIsMostSignificantBitFirst) {
  const auto p = temp_file("byte.bin");
  {
    std::ofstream f(p, std::ios::binary);
    f.put(static_cast<char>(0xA0));
  }
  EXPECT_EQ(to_ascii_bits(read_packed_bits(p)), "10100000");
  std::filesystem::remove(p);
}

TEST(Config, RuleAndStrategyJson) {
  const Json rule = Json::parse(R"({"states": 2, "initial": 0, "transitions": [[0, 1], [0, 1]],
                                    "decisions": ["skip", "select"]})");
  const SelectionRule r = rule_from_json(rule);
  EXPECT_EQ(to_ascii_bits(select_subsequence(bits("1101"), r)), "10");
  EXPECT_EQ(rule_to_json(rule_from_json(rule_to_json(r))), rule_to_json(r));
  EXPECT_THROW(rule_from_json(Json::parse(R"({"states": 1, "transitions": [[0, 0]], "decisions": ["maybe"]})")),
               UsageError);
  const Json st = Json::parse(R"({"states": 1, "transitions": [[0, 0]], "decisions": [{"stake": 1, "predict": 1}]})");
  EXPECT_EQ(martingale_capital(bits("11"), strategy_from_json(st), 1.0), (std::vector<double>{2, 4}));
  EXPECT_THROW(strategy_from_json(Json::parse(
                   R"({"states": 1, "transitions": [[0, 0]], "decisions": [{"stake": 2, "predict": 1}]})")),
               UsageError);
}
