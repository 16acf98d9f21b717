#include "errstruct/sequence_lab.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "errstruct/random.hpp"
#include "errstruct/summation.hpp"
#include "errstruct/types.hpp"

namespace errstruct {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw PreconditionError(message);
}

void require_nonempty(const BitSequence& seq) { require(!seq.bits.empty(), "bit sequence is empty"); }

template <typename Output>
void check_machine(const std::vector<std::array<std::size_t, 2>>& transitions,
                   const std::vector<Output>& outputs, std::size_t initial) {
  require(!transitions.empty(), "state machine needs at least one state");
  require(outputs.size() == transitions.size(), "one output per state is required");
  require(initial < transitions.size(), "initial state out of range");
  for (const auto& t : transitions) {
    require(t[0] < transitions.size() && t[1] < transitions.size(), "transition target out of range");
  }
}

}  // namespace

BitSequence champernowne_bits(std::size_t count) {
  require(count >= 1, "count must be positive");
  BitSequence seq;
  seq.bits.reserve(count);
  for (std::uint64_t n = 0; seq.bits.size() < count; ++n) {
    int width = 1;
    while (width < 64 && (n >> width) != 0) ++width;
    for (int b = width - 1; b >= 0 && seq.bits.size() < count; --b) {
      seq.bits.push_back(static_cast<std::uint8_t>((n >> b) & 1u));
    }
  }
  seq.provenance = {"champernowne", "count=" + std::to_string(count), std::nullopt};
  return seq;
}

BitSequence prng_bits(std::size_t count, std::uint64_t seed) {
  require(count >= 1, "count must be positive");
  BitSequence seq;
  seq.bits.reserve(count);
  CounterStream rng(seed, 0, Purpose::Bits);
  while (seq.bits.size() < count) {
    const std::uint64_t word = rng.next_u64();
    for (int b = 63; b >= 0 && seq.bits.size() < count; --b) {
      seq.bits.push_back(static_cast<std::uint8_t>((word >> b) & 1u));
    }
  }
  seq.provenance = {"philox4x64-10", "count=" + std::to_string(count), seed};
  return seq;
}

std::vector<double> block_frequencies(const BitSequence& seq, unsigned k) {
  require(k >= 1 && k <= kMaxBlockLength, "block length must be in [1, 24]");
  require(seq.size() >= k, "sequence shorter than the block length");
  const std::size_t windows = seq.size() - k + 1;
  const std::uint32_t mask = (1u << k) - 1u;
  std::vector<std::uint64_t> counts(std::size_t{1} << k, 0);
  std::uint32_t block = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    block = ((block << 1) | seq.bits[i]) & mask;
    if (i + 1 >= k) ++counts[block];
  }
  std::vector<double> freq(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    freq[i] = static_cast<double>(counts[i]) / static_cast<double>(windows);
  }
  return freq;
}

std::string block_label(std::uint32_t block, unsigned k) {
  std::string s(k, '0');
  for (unsigned i = 0; i < k; ++i) {
    if ((block >> (k - 1 - i)) & 1u) s[i] = '1';
  }
  return s;
}

NormalityReport normality_report(const BitSequence& seq, unsigned kmax) {
  require(kmax >= 1 && kmax <= kMaxBlockLength, "kmax must be in [1, 24]");
  require_nonempty(seq);
  NormalityReport report;
  report.low_power = static_cast<double>(seq.size()) < 10.0 * std::ldexp(1.0, static_cast<int>(kmax));
  for (unsigned k = 1; k <= kmax && k <= seq.size(); ++k) {
    const auto freq = block_frequencies(seq, k);
    NormalityRow row;
    row.k = k;
    row.windows = seq.size() - k + 1;
    row.degrees_of_freedom = (1u << k) - 1u;
    const double expected = std::ldexp(1.0, -static_cast<int>(k));
    const double w = static_cast<double>(row.windows);
    CompensatedSum chi;
    for (double f : freq) {
      row.max_deviation = std::max(row.max_deviation, std::abs(f - expected));
      // (count - E)^2 / E with count = f w and E = w 2^-k.
      chi.add(w * (f - expected) * (f - expected) / expected);
    }
    row.chi_square = chi.value();
    report.rows.push_back(row);
  }
  return report;
}

SelectionRule::SelectionRule(std::vector<std::array<std::size_t, 2>> transitions,
                             std::vector<bool> select, std::size_t initial, std::string name)
    : transitions_(std::move(transitions)),
      select_(std::move(select)),
      initial_(initial),
      name_(std::move(name)) {
  check_machine(transitions_, select_, initial_);
}

SelectionRule SelectionRule::all() { return SelectionRule({{0, 0}}, {true}, 0, "all"); }

SelectionRule SelectionRule::after_one() {
  // State 0: previous bit was 0 or there is no history; state 1: previous bit was 1.
  return SelectionRule({{0, 1}, {0, 1}}, {false, true}, 0, "after-one");
}

std::vector<bool> selection_mask(const BitSequence& seq, const SelectionRule& rule) {
  std::vector<bool> mask(seq.size());
  std::size_t state = rule.initial();
  for (std::size_t n = 0; n < seq.size(); ++n) {
    mask[n] = rule.selects(state);
    state = rule.next(state, seq.bits[n]);
  }
  return mask;
}

BitSequence select_subsequence(const BitSequence& seq, const SelectionRule& rule) {
  const auto mask = selection_mask(seq, rule);
  BitSequence out;
  for (std::size_t n = 0; n < seq.size(); ++n) {
    if (mask[n]) out.bits.push_back(seq.bits[n]);
  }
  out.provenance = {"select", "rule=" + rule.name() + ";source=" + seq.provenance.generator + "(" +
                                  seq.provenance.parameters + ")",
                    seq.provenance.seed};
  return out;
}

BettingStrategy::BettingStrategy(std::vector<std::array<std::size_t, 2>> transitions,
                                 std::vector<Bet> bets, std::size_t initial, std::string name)
    : transitions_(std::move(transitions)),
      bets_(std::move(bets)),
      initial_(initial),
      name_(std::move(name)) {
  check_machine(transitions_, bets_, initial_);
  for (const Bet& b : bets_) {
    require(b.stake >= 0.0 && b.stake <= 1.0, "stake fraction must lie in [0, 1]");
    require(b.predict <= 1, "predicted bit must be 0 or 1");
  }
}

BettingStrategy BettingStrategy::constant(double stake, std::uint8_t predict) {
  return BettingStrategy({{0, 0}}, {Bet{stake, predict}}, 0, "constant");
}

std::vector<double> martingale_capital(const BitSequence& seq, const BettingStrategy& strategy,
                                       double initial) {
  require(initial > 0.0 && std::isfinite(initial), "initial capital must be positive");
  std::vector<double> trajectory;
  trajectory.reserve(seq.size());
  double capital = initial;
  std::size_t state = strategy.initial();
  for (std::uint8_t bit : seq.bits) {
    const Bet& bet = strategy.bet(state);
    const double wager = bet.stake * capital;
    capital = bet.predict == bit ? capital + wager : capital - wager;
    trajectory.push_back(capital);
    state = strategy.next(state, bit);
  }
  return trajectory;
}

EnsembleResult martingale_ensemble(const BettingStrategy& strategy, double initial,
                                   std::size_t sequences, std::size_t length, std::uint64_t seed,
                                   unsigned workers) {
  require(sequences >= 2, "ensemble needs at least 2 sequences");
  require(length >= 1, "sequence length must be positive");
  std::vector<double> finals(sequences);
  const std::size_t chunks = chunk_count(sequences);
  for_each_chunk(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * kChunkSize;
    const std::size_t end = std::min(sequences, begin + kChunkSize);
    BitSequence seq;
    seq.bits.resize(length);
    for (std::size_t i = begin; i < end; ++i) {
      CounterStream rng(seed, i, Purpose::Ensemble);
      for (std::size_t n = 0; n < length; n += 64) {
        const std::uint64_t word = rng.next_u64();
        for (std::size_t b = 0; b < 64 && n + b < length; ++b) {
          seq.bits[n + b] = static_cast<std::uint8_t>((word >> (63 - b)) & 1u);
        }
      }
      finals[i] = martingale_capital(seq, strategy, initial).back();
    }
  });
  CompensatedSum s1, s2;
  for (double f : finals) {
    s1.add(f);
    s2.add(f * f);
  }
  const double n = static_cast<double>(sequences);
  const double mean = s1.value() / n;
  const double variance = std::max(0.0, (s2.value() - s1.value() * mean) / (n - 1.0));
  return {mean, std::sqrt(variance / n), sequences, length, seed};
}

double lil_statistic(const BitSequence& seq, std::size_t n0) {
  require(n0 >= 10, "burn-in must be at least 10");
  require(seq.size() >= n0, "sequence shorter than the burn-in");
  double best = 0.0;
  std::int64_t ones = 0;
  for (std::size_t n = 1; n <= seq.size(); ++n) {
    ones += seq.bits[n - 1];
    if (n < n0) continue;
    const double nn = static_cast<double>(n);
    const double excess = std::abs(2.0 * static_cast<double>(ones) - nn);
    best = std::max(best, excess / std::sqrt(2.0 * nn * std::log(std::log(nn))));
  }
  return best;
}

BitSequence parse_ascii_bits(const std::string& text) {
  BitSequence seq;
  seq.bits.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '0' || c == '1') {
      seq.bits.push_back(static_cast<std::uint8_t>(c - '0'));
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      throw ParseError("bit file may only contain '0', '1' and whitespace", i);
    }
  }
  seq.provenance = {"ascii", "", std::nullopt};
  return seq;
}

std::string to_ascii_bits(const BitSequence& seq) {
  std::string s;
  s.reserve(seq.size());
  for (std::uint8_t b : seq.bits) s.push_back(static_cast<char>('0' + b));
  return s;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spill(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path.string());
  out << data;
}

}  // namespace

BitSequence read_ascii_bits(const std::filesystem::path& path) {
  BitSequence seq = parse_ascii_bits(slurp(path));
  seq.provenance = {"file", path.string(), std::nullopt};
  return seq;
}

void write_ascii_bits(const std::filesystem::path& path, const BitSequence& seq) {
  spill(path, to_ascii_bits(seq) + "\n");
}

BitSequence read_packed_bits(const std::filesystem::path& path, std::optional<std::size_t> count) {
  const std::string data = slurp(path);
  BitSequence seq;
  const std::size_t total = data.size() * 8;
  const std::size_t n = count.value_or(total);
  if (n > total) throw PreconditionError("packed file holds fewer bits than requested");
  seq.bits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto byte = static_cast<unsigned char>(data[i / 8]);
    seq.bits[i] = static_cast<std::uint8_t>((byte >> (7 - i % 8)) & 1u);
  }
  seq.provenance = {"file", path.string(), std::nullopt};
  return seq;
}

void write_packed_bits(const std::filesystem::path& path, const BitSequence& seq) {
  std::string data((seq.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.bits[i]) data[i / 8] = static_cast<char>(data[i / 8] | (0x80 >> (i % 8)));
  }
  spill(path, data);
}

}  // namespace errstruct
