#include "zoorun/processing.hpp"

#include <algorithm>
#include <cmath>

#include "zoorun/errors.hpp"
#include "zoorun/kernels.hpp"

namespace zoorun::proc {

namespace {

using spec::ProcStep;

// Grouping of elements by the axes NOT being reduced. group_of[i] gives the
// group id of flat element i; groups enumerate kept-axes combinations in
// row-major order.
struct Grouping {
  int64_t group_count = 1;
  std::vector<int64_t> group_of;  // empty when group_count == 1
};

Grouping make_grouping(const Tensor& t, const std::string& reduce_axes) {
  Grouping g;
  const auto& shape = t.shape();
  const size_t rank = shape.size();
  std::vector<bool> reduced(rank, reduce_axes.empty());
  for (char c : reduce_axes) {
    int i = t.axes().index_of(c);
    if (i >= 0) reduced[static_cast<size_t>(i)] = true;
  }
  std::vector<int64_t> gstride(rank, 0);
  for (size_t i = rank; i-- > 0;) {
    if (!reduced[i]) {
      gstride[i] = g.group_count;
      g.group_count *= shape[i];
    }
  }
  if (g.group_count == 1) return g;

  const int64_t n = t.element_count();
  g.group_of.resize(static_cast<size_t>(n));
  std::vector<int64_t> idx(rank, 0);
  for (int64_t flat = 0; flat < n; ++flat) {
    int64_t gid = 0;
    for (size_t i = 0; i < rank; ++i) gid += idx[i] * gstride[i];
    g.group_of[static_cast<size_t>(flat)] = gid;
    for (size_t i = rank; i-- > 0;) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  return g;
}

// Values of each group, gathered in flat-index order.
std::vector<std::vector<double>> gather_groups(std::span<const double> xs,
                                               const Grouping& g) {
  std::vector<std::vector<double>> groups(
      static_cast<size_t>(g.group_count));
  if (g.group_count == 1) {
    groups[0].assign(xs.begin(), xs.end());
    return groups;
  }
  for (size_t i = 0; i < xs.size(); ++i)
    groups[static_cast<size_t>(g.group_of[i])].push_back(xs[i]);
  return groups;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double r = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(r));
  const double frac = r - std::floor(r);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double kwarg_number(const ProcStep& s, const char* key, double fallback) {
  auto it = s.kwargs.find(key);
  return it == s.kwargs.end() ? fallback : it->get<double>();
}

std::string kwarg_axes(const ProcStep& s) {
  auto it = s.kwargs.find("axes");
  return it == s.kwargs.end() ? std::string() : it->get<std::string>();
}

// Scalar kwarg broadcast, or per-channel array along axis c.
std::vector<double> per_channel_values(const nlohmann::json& v,
                                       const Tensor& t, const char* key) {
  if (v.is_number()) return {v.get<double>()};
  auto vals = v.get<std::vector<double>>();
  const int c = t.axes().index_of('c');
  if (c < 0)
    throw SchemaError(std::string(key) +
                      ": per-channel values require a 'c' axis on tensor '" +
                      t.name() + "'");
  if (static_cast<int64_t>(vals.size()) != t.shape()[static_cast<size_t>(c)])
    throw SchemaError(std::string(key) + ": " + std::to_string(vals.size()) +
                      " values for " +
                      std::to_string(t.shape()[static_cast<size_t>(c)]) +
                      " channels");
  return vals;
}

// Channel index of each flat element, or empty when not needed.
std::vector<int64_t> channel_of(const Tensor& t) {
  Grouping g = make_grouping(t, [&] {
    std::string all;
    for (size_t i = 0; i < t.axes().rank(); ++i)
      if (t.axes()[i] != 'c') all += t.axes()[i];
    return all;
  }());
  return std::move(g.group_of);
}

Tensor elementwise(const Tensor& t, auto f) {
  Tensor out = Tensor::zeros(t.name(), t.axes(), t.shape(), DType::f64);
  kernels::map(t.values<double>(), out.mutable_values<double>(), f);
  return out;
}

Tensor apply_per_channel_affine(const Tensor& t, const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() <= 1 && b.size() <= 1) {
    const double ga = a.empty() ? 1.0 : a[0];
    const double gb = b.empty() ? 0.0 : b[0];
    return elementwise(t, [ga, gb](double x) { return ga * x + gb; });
  }
  auto chan = channel_of(t);
  Tensor out = Tensor::zeros(t.name(), t.axes(), t.shape(), DType::f64);
  auto xs = t.values<double>();
  auto ys = out.mutable_values<double>();
  for (size_t i = 0; i < xs.size(); ++i) {
    const size_t c = chan.empty() ? 0 : static_cast<size_t>(chan[i]);
    const double ga = a.size() > 1 ? a[c] : (a.empty() ? 1.0 : a[0]);
    const double gb = b.size() > 1 ? b[c] : (b.empty() ? 0.0 : b[0]);
    ys[i] = ga * xs[i] + gb;
  }
  return out;
}

// Group statistics (mean, std) per group with deterministic summation.
void group_mean_std(const std::vector<std::vector<double>>& groups,
                    std::vector<double>& means, std::vector<double>& stds) {
  means.resize(groups.size());
  stds.resize(groups.size());
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    auto st = kernels::sum_stats(groups[gi]);
    const double n = static_cast<double>(st.count);
    const double mean = st.count ? st.sum / n : 0.0;
    const double var = st.count ? st.sumsq / n - mean * mean : 0.0;
    means[gi] = mean;
    stds[gi] = std::sqrt(std::max(0.0, var));
  }
}

Tensor apply_grouped(const Tensor& t, const Grouping& g, auto f) {
  Tensor out = Tensor::zeros(t.name(), t.axes(), t.shape(), DType::f64);
  auto xs = t.values<double>();
  auto ys = out.mutable_values<double>();
  for (size_t i = 0; i < xs.size(); ++i) {
    const size_t gi =
        g.group_of.empty() ? 0 : static_cast<size_t>(g.group_of[i]);
    ys[i] = f(xs[i], gi);
  }
  return out;
}

}  // namespace

Tensor apply_step(const ProcStep& step, const Tensor& t, ProcContext& ctx,
                  int step_index) {
  if (t.dtype() != DType::f64)
    return apply_step(step, t.cast(DType::f64), ctx, step_index);

  if (step.name == "binarize") {
    const double thr = step.kwargs.at("threshold").get<double>();
    return elementwise(t, [thr](double x) { return x > thr ? 1.0 : 0.0; });
  }
  if (step.name == "clip") {
    const double lo = step.kwargs.at("min").get<double>();
    const double hi = step.kwargs.at("max").get<double>();
    return elementwise(t, [lo, hi](double x) { return std::clamp(x, lo, hi); });
  }
  if (step.name == "sigmoid") {
    return elementwise(t, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  }
  if (step.name == "scale_linear") {
    auto gain = per_channel_values(step.kwargs.at("gain"), t, "gain");
    auto offset = per_channel_values(step.kwargs.at("offset"), t, "offset");
    return apply_per_channel_affine(t, gain, offset);
  }
  if (step.name == "zero_mean_unit_variance") {
    const double eps = kwarg_number(step, "eps", 1e-6);
    if (step.mode == "fixed") {
      auto mean = per_channel_values(step.kwargs.at("mean"), t, "mean");
      auto std_ = per_channel_values(step.kwargs.at("std"), t, "std");
      std::vector<double> a(std::max(mean.size(), std_.size())),
          b(a.size());
      for (size_t c = 0; c < a.size(); ++c) {
        const double m = mean.size() > 1 ? mean[c] : mean[0];
        const double s = std_.size() > 1 ? std_[c] : std_[0];
        a[c] = 1.0 / (s + eps);
        b[c] = -m / (s + eps);
      }
      return apply_per_channel_affine(t, a, b);
    }
    Grouping g = make_grouping(t, kwarg_axes(step));
    auto groups = gather_groups(t.values<double>(), g);
    std::vector<double> means, stds;
    group_mean_std(groups, means, stds);
    if (step_index >= 0) {
      std::vector<double> stats = means;
      stats.insert(stats.end(), stds.begin(), stds.end());
      ctx.sample_stats.emplace(std::make_pair(t.name(), step_index),
                               std::move(stats));
    }
    return apply_grouped(t, g, [&](double x, size_t gi) {
      return (x - means[gi]) / (stds[gi] + eps);
    });
  }
  if (step.name == "scale_range") {
    const double eps = kwarg_number(step, "eps", 1e-6);
    if (step.mode == "fixed") {
      auto lo = per_channel_values(step.kwargs.at("min_value"), t, "min_value");
      auto hi = per_channel_values(step.kwargs.at("max_value"), t, "max_value");
      std::vector<double> a(std::max(lo.size(), hi.size())), b(a.size());
      for (size_t c = 0; c < a.size(); ++c) {
        const double l = lo.size() > 1 ? lo[c] : lo[0];
        const double h = hi.size() > 1 ? hi[c] : hi[0];
        a[c] = 1.0 / (h - l + eps);
        b[c] = -l / (h - l + eps);
      }
      return apply_per_channel_affine(t, a, b);
    }
    const double qlo = kwarg_number(step, "min_percentile", 0.0);
    const double qhi = kwarg_number(step, "max_percentile", 100.0);
    Grouping g = make_grouping(t, kwarg_axes(step));
    auto groups = gather_groups(t.values<double>(), g);
    std::vector<double> plo(groups.size()), phi(groups.size());
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      std::sort(groups[gi].begin(), groups[gi].end());
      plo[gi] = percentile_sorted(groups[gi], qlo);
      phi[gi] = percentile_sorted(groups[gi], qhi);
    }
    if (step_index >= 0) {
      std::vector<double> stats = plo;
      stats.insert(stats.end(), phi.begin(), phi.end());
      ctx.sample_stats.emplace(std::make_pair(t.name(), step_index),
                               std::move(stats));
    }
    return apply_grouped(t, g, [&](double x, size_t gi) {
      return (x - plo[gi]) / (phi[gi] - plo[gi] + eps);
    });
  }
  throw SchemaError("unknown processing step '" + step.name + "'");
}

Tensor apply_chain(const std::vector<ProcStep>& steps, const Tensor& t,
                   ProcContext& ctx, DType declared) {
  if (steps.empty() && t.dtype() == declared) return t;
  Tensor cur = t.cast(DType::f64);
  for (size_t i = 0; i < steps.size(); ++i) {
    try {
      cur = apply_step(steps[i], cur, ctx, static_cast<int>(i));
    } catch (const Error& e) {
      throw SchemaError("processing step " + std::to_string(i) + " (" +
                        steps[i].name + "): " + e.what());
    }
  }
  return cur.cast(declared);
}

Tensor apply_chain(const std::vector<ProcStep>& steps, const Tensor& t,
                   ProcContext& ctx) {
  return apply_chain(steps, t, ctx, t.dtype());
}

}  // namespace zoorun::proc
