#include "s2st/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace s2st {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::WER: return "WER";
    case Metric::BLEU: return "BLEU";
    case Metric::METEOR: return "METEOR";
    case Metric::MCD: return "MCD";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "WER") return Metric::WER;
  if (up == "BLEU") return Metric::BLEU;
  if (up == "METEOR") return Metric::METEOR;
  if (up == "MCD") return Metric::MCD;
  fail_usage("unknown metric '" + std::string(s) + "' (expected WER, BLEU, METEOR or MCD)");
}

double orient(Metric metric, double rawValue) {
  switch (metric) {
    case Metric::BLEU:
    case Metric::METEOR: return rawValue;
    case Metric::WER:
    case Metric::MCD: return -rawValue;
  }
  fail_usage("unknown metric");
}

MetricScore make_score(Metric metric, double rawValue) { return {metric, rawValue, orient(metric, rawValue)}; }

std::size_t edit_distance(const LabelSequence& a, const LabelSequence& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double wer(const LabelSequence& reference, const LabelSequence& hypothesis) {
  if (reference.empty()) fail_data("WER is undefined for an empty reference");
  return static_cast<double>(edit_distance(reference, hypothesis)) / static_cast<double>(reference.size());
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < matches.size(); ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hypothesisLength += other.hypothesisLength;
  referenceLength += other.referenceLength;
  return *this;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts ngrams(const LabelSequence& s, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

BleuStats bleu_stats(const std::vector<LabelSequence>& references, const LabelSequence& hypothesis, int maxN) {
  if (references.empty()) fail_data("BLEU needs at least one reference");
  if (maxN < 1) fail_usage("BLEU maxN must be >= 1");
  BleuStats stats(maxN);
  stats.hypothesisLength = static_cast<long>(hypothesis.size());
  // Closest reference length, ties to the shorter one.
  long best = -1;
  for (const auto& r : references) {
    const long len = static_cast<long>(r.size());
    if (best < 0 || std::labs(len - stats.hypothesisLength) < std::labs(best - stats.hypothesisLength) ||
        (std::labs(len - stats.hypothesisLength) == std::labs(best - stats.hypothesisLength) && len < best))
      best = len;
  }
  stats.referenceLength = best;
  for (int n = 1; n <= maxN; ++n) {
    const auto hyp = ngrams(hypothesis, static_cast<std::size_t>(n));
    NgramCounts maxRef;
    for (const auto& r : references)
      for (const auto& [g, c] : ngrams(r, static_cast<std::size_t>(n))) maxRef[g] = std::max(maxRef[g], c);
    long matched = 0, total = 0;
    for (const auto& [g, c] : hyp) {
      total += c;
      auto it = maxRef.find(g);
      if (it != maxRef.end()) matched += std::min(c, it->second);
    }
    stats.matches[static_cast<std::size_t>(n - 1)] = matched;
    stats.totals[static_cast<std::size_t>(n - 1)] = total;
  }
  return stats;
}

double bleu_from_stats(const BleuStats& stats, bool smooth) {
  if (stats.hypothesisLength == 0) return 0.0;
  double logSum = 0.0;
  const auto maxN = stats.matches.size();
  for (std::size_t n = 0; n < maxN; ++n) {
    double m = static_cast<double>(stats.matches[n]);
    double t = static_cast<double>(stats.totals[n]);
    if (smooth && n >= 1) {
      m += 1.0;
      t += 1.0;
    }
    if (m <= 0.0 || t <= 0.0) return 0.0;
    logSum += std::log(m / t);
  }
  const double c = static_cast<double>(stats.hypothesisLength);
  const double r = static_cast<double>(stats.referenceLength);
  const double logBp = c > r ? 0.0 : 1.0 - r / c;
  return 100.0 * std::exp(logBp + logSum / static_cast<double>(maxN));
}

double bleu(const std::vector<LabelSequence>& references, const LabelSequence& hypothesis, int maxN, bool smooth) {
  return bleu_from_stats(bleu_stats(references, hypothesis, maxN), smooth);
}

double corpus_bleu(const std::vector<LabelSequence>& references, const std::vector<LabelSequence>& hypotheses,
                   int maxN) {
  if (references.size() != hypotheses.size()) fail_data("corpus BLEU needs one reference per hypothesis");
  BleuStats total(maxN);
  for (std::size_t i = 0; i < references.size(); ++i) total += bleu_stats({references[i]}, hypotheses[i], maxN);
  return bleu_from_stats(total, false);
}

namespace {

/// Exhaustive alignment search with pruning; falls back to the best alignment found
/// once the node budget is exhausted.
class MeteorAligner {
 public:
  MeteorAligner(const LabelSequence& ref, const LabelSequence& hyp) : ref_(ref), hyp_(hyp), used_(ref.size(), false) {
    candidates_.resize(hyp.size());
    for (std::size_t i = 0; i < hyp.size(); ++i)
      for (std::size_t j = 0; j < ref.size(); ++j)
        if (hyp[i] == ref[j]) candidates_[i].push_back(static_cast<int>(j));
    matchable_.assign(hyp.size() + 1, 0);
    for (std::size_t i = hyp.size(); i-- > 0;) matchable_[i] = matchable_[i + 1] + (candidates_[i].empty() ? 0 : 1);
  }

  MeteorDetail run() {
    search(0, 0, 0, -2, -2);
    return {0.0, bestMatches_, bestChunks_};
  }

 private:
  void search(std::size_t i, int matches, int chunks, int lastHyp, int lastRef) {
    if (++nodes_ > kNodeBudget && bestMatches_ >= 0) return;
    if (matches + matchable_[i] < bestMatches_) return;
    if (matches + matchable_[i] == bestMatches_ && chunks >= bestChunks_ && bestMatches_ > 0 && matchable_[i] == 0)
      return;
    if (i == hyp_.size()) {
      if (matches > bestMatches_ || (matches == bestMatches_ && chunks < bestChunks_)) {
        bestMatches_ = matches;
        bestChunks_ = chunks;
      }
      return;
    }
    // Try continuing the current chunk first, then the remaining candidates in order.
    std::vector<int> order;
    for (int j : candidates_[i])
      if (!used_[static_cast<std::size_t>(j)] && lastHyp == static_cast<int>(i) - 1 && j == lastRef + 1) order.push_back(j);
    for (int j : candidates_[i])
      if (!used_[static_cast<std::size_t>(j)] && !(lastHyp == static_cast<int>(i) - 1 && j == lastRef + 1))
        order.push_back(j);
    for (int j : order) {
      const bool extends = lastHyp == static_cast<int>(i) - 1 && j == lastRef + 1;
      const int nextChunks = chunks + (extends ? 0 : 1);
      if (bestMatches_ >= 0 && matches + 1 + matchable_[i + 1] == bestMatches_ && nextChunks >= bestChunks_) continue;
      used_[static_cast<std::size_t>(j)] = true;
      search(i + 1, matches + 1, nextChunks, static_cast<int>(i), j);
      used_[static_cast<std::size_t>(j)] = false;
    }
    search(i + 1, matches, chunks, lastHyp, lastRef);
  }

  static constexpr long kNodeBudget = 200000;
  const LabelSequence& ref_;
  const LabelSequence& hyp_;
  std::vector<bool> used_;
  std::vector<std::vector<int>> candidates_;
  std::vector<int> matchable_;
  int bestMatches_ = -1;
  int bestChunks_ = std::numeric_limits<int>::max();
  long nodes_ = 0;
};

}  // namespace

MeteorDetail meteor_detail(const LabelSequence& reference, const LabelSequence& hypothesis) {
  if (reference.empty() || hypothesis.empty()) return {};
  auto d = MeteorAligner(reference, hypothesis).run();
  if (d.matches <= 0) return {0.0, 0, 0};
  const double m = d.matches;
  const double p = m / static_cast<double>(hypothesis.size());
  const double r = m / static_cast<double>(reference.size());
  const double f = 10.0 * p * r / (r + 9.0 * p);
  const double penalty = 0.5 * std::pow(static_cast<double>(d.chunks) / m, 3.0);
  d.score = f * (1.0 - penalty);
  return d;
}

double meteor_lite(const LabelSequence& reference, const LabelSequence& hypothesis) {
  return meteor_detail(reference, hypothesis).score;
}

double mcd(const FeatureFrames& reference, const FeatureFrames& hypothesis) {
  if (reference.rows() == 0 || hypothesis.rows() == 0) fail_data("MCD needs non-empty frame sequences");
  if (reference.cols() != hypothesis.cols()) fail_data("MCD frame dimensions differ");
  const Eigen::Index n = reference.rows(), m = hypothesis.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n + 1, m + 1, kInf);
  Eigen::MatrixXi steps = Eigen::MatrixXi::Zero(n + 1, m + 1);
  cost(0, 0) = 0.0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    for (Eigen::Index j = 1; j <= m; ++j) {
      const double d = (reference.row(i - 1) - hypothesis.row(j - 1)).norm();
      // Ties prefer the diagonal, then advancing the reference, then the hypothesis.
      double best = cost(i - 1, j - 1);
      int len = steps(i - 1, j - 1);
      if (cost(i - 1, j) < best) {
        best = cost(i - 1, j);
        len = steps(i - 1, j);
      }
      if (cost(i, j - 1) < best) {
        best = cost(i, j - 1);
        len = steps(i, j - 1);
      }
      cost(i, j) = best + d;
      steps(i, j) = len + 1;
    }
  }
  const double k = 10.0 / std::log(10.0) * std::sqrt(2.0);
  return k * cost(n, m) / static_cast<double>(steps(n, m));
}

}  // namespace s2st
