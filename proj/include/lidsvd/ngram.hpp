#pragma once

// Skip-K bigram statistics over decoded component sequences and the
// utterance matrix built from them.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lidsvd/error.hpp"
#include "lidsvd/gmm.hpp"
#include "lidsvd/linalg.hpp"
#include "lidsvd/parallel.hpp"

namespace lidsvd::ngram {

struct SkipgramConfig {
  int skip = 1;  // K; 1 is the plain bigram
  int alphabet_size = 64;

  void validate() const {
    if (skip < 1) throw Error(Errc::invalid_argument, "skip parameter must be >= 1");
    if (alphabet_size < 1) throw Error(Errc::invalid_argument, "alphabet must not be empty");
  }
};

struct SkipgramMatrix {
  RowMatrix conditional;          // B(i, j) = P(SS_t = j | SS_{t-K} = i)
  Eigen::VectorXd context_counts;  // denominators, one per i
};

/// Conditional frequencies over every pair (SS_{t-K}, SS_t), K < t <= T.
/// Rows whose context symbol never occurs are left at zero.
inline SkipgramMatrix skipgram(std::span<const int> symbols, const SkipgramConfig& cfg) {
  cfg.validate();
  const std::size_t k = static_cast<std::size_t>(cfg.skip);
  if (symbols.size() <= k)
    throw Error(Errc::too_short, "sequence of " + std::to_string(symbols.size()) +
                                     " symbols is too short for skip " + std::to_string(cfg.skip));
  const int m = cfg.alphabet_size;
  SkipgramMatrix out{RowMatrix::Zero(m, m), Eigen::VectorXd::Zero(m)};
  for (std::size_t t = k; t < symbols.size(); ++t) {
    const int from = symbols[t - k];
    const int to = symbols[t];
    if (from < 0 || from >= m || to < 0 || to >= m)
      throw Error(Errc::invalid_argument, "symbol outside alphabet of size " + std::to_string(m));
    out.conditional(from, to) += 1.0;
    out.context_counts[from] += 1.0;
  }
  for (int i = 0; i < m; ++i)
    if (out.context_counts[i] > 0.0) out.conditional.row(i) /= out.context_counts[i];
  return out;
}

inline SkipgramMatrix skipgram(const gmm::SymbolSequence& seq, const SkipgramConfig& cfg) {
  if (seq.alphabet_size != cfg.alphabet_size)
    throw Error(Errc::dimension_mismatch, "sequence alphabet differs from skipgram alphabet");
  return skipgram(std::span<const int>(seq.symbols), cfg);
}

/// Row-major: entry (i, j) lands at index M*i + j.
inline Eigen::VectorXd flatten(const SkipgramMatrix& b) {
  return Eigen::Map<const Eigen::VectorXd>(b.conditional.data(), b.conditional.size());
}

inline RowMatrix unflatten(const Eigen::VectorXd& v, int alphabet_size) {
  if (v.size() != static_cast<Eigen::Index>(alphabet_size) * alphabet_size)
    throw Error(Errc::dimension_mismatch, "vector length is not alphabet_size^2");
  return Eigen::Map<const RowMatrix>(v.data(), alphabet_size, alphabet_size);
}

struct UtteranceMatrix {
  RowMatrix rows;  // N_tot x M*M
  std::vector<int> labels;
};

/// Stacks one flattened skipgram per utterance, in input order.
inline UtteranceMatrix build_utterance_matrix(std::span<const std::pair<gmm::SymbolSequence, int>> seqs,
                                              const SkipgramConfig& cfg) {
  cfg.validate();
  const Eigen::Index width = static_cast<Eigen::Index>(cfg.alphabet_size) * cfg.alphabet_size;
  UtteranceMatrix out{RowMatrix(static_cast<Eigen::Index>(seqs.size()), width), {}};
  out.labels.reserve(seqs.size());
  for (const auto& [seq, label] : seqs) out.labels.push_back(label);
  parallel_for(seqs.size(), [&](std::size_t u) {
    out.rows.row(static_cast<Eigen::Index>(u)) = flatten(skipgram(seqs[u].first, cfg)).transpose();
  });
  return out;
}

}  // namespace lidsvd::ngram
