#include "mvcl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvcl::oracle {

namespace {

using Real = long double;

std::vector<std::vector<Real>> Unit(const Matrix& m) {
  std::vector<std::vector<Real>> out;
  for (const auto& row : m) {
    Real ss = 0;
    for (double v : row) ss += Real(v) * v;
    std::vector<Real> r;
    for (double v : row) r.push_back(v / std::sqrt(ss));
    out.push_back(r);
  }
  return out;
}

Real Dot(const std::vector<Real>& a, const std::vector<Real>& b) {
  Real s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

Real CosineOf(const std::vector<double>& a, const std::vector<double>& b) {
  Real dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += Real(a[k]) * b[k];
    na += Real(a[k]) * a[k];
    nb += Real(b[k]) * b[k];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Shared skeleton of the SINCERE family: the denominator holds the current
// positive and every negative, each negative shifted by eps.
double SincereLike(const Matrix& z, const std::vector<int>& labels, double tau, double eps) {
  const auto u = Unit(z);
  const std::size_t n = u.size();
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Real anchor = 0;
    int positives = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || labels[p] != labels[i]) continue;
      ++positives;
      const Real pos = std::exp(Dot(u[i], u[p]) / tau);
      Real denom = pos;
      for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] != labels[i]) denom += std::exp((Dot(u[i], u[k]) + eps) / tau);
      }
      anchor += -std::log(pos / denom);
    }
    if (positives == 0) throw std::invalid_argument("anchor without positive");
    total += anchor / positives;
  }
  return static_cast<double>(total / n);
}

}  // namespace

double CrossEntropy(const Matrix& logits, const std::vector<int>& labels) {
  Real total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Real denom = 0;
    for (double l : logits[i]) denom += std::exp(Real(l));
    total += -std::log(std::exp(Real(logits[i][labels[i]])) / denom);
  }
  return static_cast<double>(total / logits.size());
}

double InfoNce(const Matrix& z_a, const Matrix& z_b, double tau) {
  const auto a = Unit(z_a), b = Unit(z_b);
  Real total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Real denom = 0;
    for (std::size_t k = 0; k < b.size(); ++k) denom += std::exp(Dot(a[i], b[k]) / tau);
    total += -std::log(std::exp(Dot(a[i], b[i]) / tau) / denom);
  }
  return static_cast<double>(total / a.size());
}

double SimClr(const Matrix& z, double tau) {
  const auto u = Unit(z);
  const std::size_t n = u.size(), half = n / 2;
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t partner = i < half ? i + half : i - half;
    Real denom = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) denom += std::exp(Dot(u[i], u[k]) / tau);
    }
    total += -std::log(std::exp(Dot(u[i], u[partner]) / tau) / denom);
  }
  return static_cast<double>(total / n);
}

double SupCon(const Matrix& z, const std::vector<int>& labels, double tau) {
  const auto u = Unit(z);
  const std::size_t n = u.size();
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Real denom = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) denom += std::exp(Dot(u[i], u[k]) / tau);
    }
    Real anchor = 0;
    int positives = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || labels[p] != labels[i]) continue;
      ++positives;
      anchor += -std::log(std::exp(Dot(u[i], u[p]) / tau) / denom);
    }
    if (positives == 0) throw std::invalid_argument("anchor without positive");
    total += anchor / positives;
  }
  return static_cast<double>(total / n);
}

double Sincere(const Matrix& z, const std::vector<int>& labels, double tau) {
  return SincereLike(z, labels, tau, 0.0);
}

double EpsSupInfoNce(const Matrix& z, const std::vector<int>& labels, double tau, double eps) {
  return SincereLike(z, labels, tau, eps);
}

std::vector<int> Knn(const Matrix& corpus, const std::vector<int>& labels, const Matrix& queries,
                     int k) {
  std::vector<int> out;
  for (const auto& q : queries) {
    std::vector<bool> taken(corpus.size(), false);
    std::vector<int> votes;
    std::vector<Real> sims;
    for (int round = 0; round < k; ++round) {
      std::size_t best = corpus.size();
      Real best_sim = 0;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (taken[i]) continue;
        const Real s = CosineOf(q, corpus[i]);
        if (best == corpus.size() || s > best_sim) {
          best = i;
          best_sim = s;
        }
      }
      taken[best] = true;
      votes.push_back(labels[best]);
      sims.push_back(best_sim);
    }
    int winner = -1, winner_count = 0;
    Real winner_sum = 0;
    for (int c = 0; c <= *std::max_element(labels.begin(), labels.end()); ++c) {
      int count = 0;
      Real sum = 0;
      for (std::size_t v = 0; v < votes.size(); ++v) {
        if (votes[v] == c) {
          ++count;
          sum += sims[v];
        }
      }
      if (count == 0) continue;
      if (winner < 0 || count > winner_count || (count == winner_count && sum > winner_sum)) {
        winner = c;
        winner_count = count;
        winner_sum = sum;
      }
    }
    out.push_back(winner);
  }
  return out;
}

std::vector<std::size_t> Ranking(const Matrix& corpus, const std::vector<double>& query) {
  std::vector<Real> sims;
  for (const auto& row : corpus) sims.push_back(CosineOf(query, row));
  std::vector<std::size_t> order;
  std::vector<bool> taken(corpus.size(), false);
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    std::size_t best = corpus.size();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!taken[i] && (best == corpus.size() || sims[i] > sims[best])) best = i;
    }
    taken[best] = true;
    order.push_back(best);
  }
  return order;
}

double AveragePrecision(const std::vector<bool>& relevant, int k) {
  int total_relevant = 0;
  for (bool r : relevant) total_relevant += r;
  const int depth = k > 0 ? std::min<int>(k, relevant.size()) : static_cast<int>(relevant.size());
  Real sum = 0;
  for (int r = 0; r < depth; ++r) {
    if (!relevant[r]) continue;
    int hits = 0;
    for (int j = 0; j <= r; ++j) hits += relevant[j];
    sum += Real(hits) / Real(r + 1);
  }
  const int denom = k > 0 ? std::min(total_relevant, k) : total_relevant;
  return static_cast<double>(sum / denom);
}

}  // namespace mvcl::oracle
