#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace errstruct {

struct Provenance {
  std::string generator;
  std::string parameters;
  std::optional<std::uint64_t> seed;
};

struct BitSequence {
  std::vector<std::uint8_t> bits;
  Provenance provenance;

  std::size_t size() const { return bits.size(); }
};

// Binary expansions of 0, 1, 2, 3, ... concatenated: 0 1 10 11 100 ...
// Starts at 0, unlike the classical constant which starts at 1.
BitSequence champernowne_bits(std::size_t count);

// Bits of the Philox stream (seed, stream 0, Purpose::Bits), most significant
// bit of each 64-bit word first.
BitSequence prng_bits(std::size_t count, std::uint64_t seed);

inline constexpr unsigned kMaxBlockLength = 24;

// Sliding-window frequency of each length-k block, indexed by the block read
// as a binary number with its first bit most significant.
std::vector<double> block_frequencies(const BitSequence& seq, unsigned k);

std::string block_label(std::uint32_t block, unsigned k);

struct NormalityRow {
  unsigned k = 0;
  std::size_t windows = 0;
  double max_deviation = 0.0;
  // Against the uniform law on 2^k blocks with 2^k - 1 degrees of freedom.
  // Approximate: sliding windows are not independent.
  double chi_square = 0.0;
  unsigned degrees_of_freedom = 0;
};

struct NormalityReport {
  std::vector<NormalityRow> rows;
  // Set when len < 10 * 2^kmax.
  bool low_power = false;
};

NormalityReport normality_report(const BitSequence& seq, unsigned kmax);

// Finite-state machine over bit histories. The output of the current state is
// fixed before bit n is read, and bit n only moves the machine afterwards, so
// every decision depends on bits 0..n-1 alone.
class SelectionRule {
 public:
  SelectionRule(std::vector<std::array<std::size_t, 2>> transitions, std::vector<bool> select,
                std::size_t initial = 0, std::string name = "fsm");

  // Selects every position.
  static SelectionRule all();
  // Selects position n iff bit n-1 was 1.
  static SelectionRule after_one();

  std::size_t states() const { return transitions_.size(); }
  std::size_t initial() const { return initial_; }
  std::size_t next(std::size_t state, std::uint8_t bit) const { return transitions_[state][bit]; }
  bool selects(std::size_t state) const { return select_[state]; }
  const std::string& name() const { return name_; }
  const std::vector<std::array<std::size_t, 2>>& transitions() const { return transitions_; }

 private:
  std::vector<std::array<std::size_t, 2>> transitions_;
  std::vector<bool> select_;
  std::size_t initial_;
  std::string name_;
};

// selection_mask(seq, rule)[n] is the rule's decision at position n.
std::vector<bool> selection_mask(const BitSequence& seq, const SelectionRule& rule);
BitSequence select_subsequence(const BitSequence& seq, const SelectionRule& rule);

struct Bet {
  double stake = 0.0;  // fraction of current capital, in [0, 1]
  std::uint8_t predict = 1;
};

class BettingStrategy {
 public:
  BettingStrategy(std::vector<std::array<std::size_t, 2>> transitions, std::vector<Bet> bets,
                  std::size_t initial = 0, std::string name = "fsm");

  static BettingStrategy constant(double stake, std::uint8_t predict);

  std::size_t states() const { return transitions_.size(); }
  std::size_t initial() const { return initial_; }
  std::size_t next(std::size_t state, std::uint8_t bit) const { return transitions_[state][bit]; }
  const Bet& bet(std::size_t state) const { return bets_[state]; }
  const std::string& name() const { return name_; }
  const std::vector<std::array<std::size_t, 2>>& transitions() const { return transitions_; }

 private:
  std::vector<std::array<std::size_t, 2>> transitions_;
  std::vector<Bet> bets_;
  std::size_t initial_;
  std::string name_;
};

// Capital after each bit under fair even-odds payout:
// c_{n+1} = c_n * (1 + stake_n) on a correct prediction, c_n * (1 - stake_n) otherwise.
std::vector<double> martingale_capital(const BitSequence& seq, const BettingStrategy& strategy,
                                       double initial);

struct EnsembleResult {
  double mean_final = 0.0;
  double std_error = 0.0;
  std::size_t sequences = 0;
  std::size_t length = 0;
  std::uint64_t seed = 0;
};

// Final capital over `sequences` PRNG sequences; sequence i uses the stream
// (seed, i, Purpose::Ensemble).
EnsembleResult martingale_ensemble(const BettingStrategy& strategy, double initial,
                                   std::size_t sequences, std::size_t length, std::uint64_t seed,
                                   unsigned workers = 1);

// max over n in [n0, len] of |2 S_n - n| / sqrt(2 n ln ln n).
double lil_statistic(const BitSequence& seq, std::size_t n0);

// '0'/'1' characters; whitespace is skipped.
BitSequence parse_ascii_bits(const std::string& text);
std::string to_ascii_bits(const BitSequence& seq);
BitSequence read_ascii_bits(const std::filesystem::path& path);
void write_ascii_bits(const std::filesystem::path& path, const BitSequence& seq);

// Packed bytes, most significant bit first. `count` truncates the trailing pad.
BitSequence read_packed_bits(const std::filesystem::path& path,
                             std::optional<std::size_t> count = std::nullopt);
void write_packed_bits(const std::filesystem::path& path, const BitSequence& seq);

}  // namespace errstruct
