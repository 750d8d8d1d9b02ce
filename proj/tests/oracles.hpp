#pragma once

// Independent straight-line reference implementations used only by tests.
// They deliberately avoid the library's Eigen code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

namespace oracle {

inline long double kl(const std::vector<double>& y, const std::vector<double>& p) {
  long double sy = 0, sp = 0;
  for (double v : y) sy += v;
  for (double v : p) sp += v;
  long double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double yi = y[i] / sy, pi = p[i] / sp;
    if (yi > 0) acc += yi * std::log(yi / (pi + 1e-8L));
  }
  return acc;
}

inline long double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline long double nss(const std::vector<double>& p, const std::vector<std::int64_t>& fix) {
  long double mean = 0;
  for (double v : p) mean += v;
  mean /= p.size();
  long double var = 0;
  for (double v : p) var += (v - mean) * (v - mean);
  const long double sd = std::sqrt(var / p.size());
  long double acc = 0;
  for (std::int64_t f : fix) acc += (p[static_cast<std::size_t>(f)] - mean) / sd;
  return acc / fix.size();
}

/// ROC over thresholds at fixated values, counting by a full scan each time.
inline long double auc_judd(const std::vector<double>& p, const std::vector<std::int64_t>& fix) {
  std::set<std::int64_t> pos(fix.begin(), fix.end());
  std::set<double, std::greater<>> thresholds;
  for (std::int64_t f : pos) thresholds.insert(p[static_cast<std::size_t>(f)]);
  const long double np = pos.size(), nn = p.size() - pos.size();
  std::vector<std::pair<long double, long double>> roc{{0, 0}};
  for (double t : thresholds) {
    long double tp = 0, fp = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < t) continue;
      if (pos.count(static_cast<std::int64_t>(i))) tp += 1; else fp += 1;
    }
    roc.emplace_back(fp / nn, tp / np);
  }
  roc.emplace_back(1, 1);
  long double area = 0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].first - roc[i - 1].first) * (roc[i].second + roc[i - 1].second) / 2;
  return area;
}

inline long double mse(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / a.size();
}

}  // namespace oracle
