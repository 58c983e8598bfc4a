#include "segpipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segpipe/label_ops.hpp"

namespace segpipe {

namespace {

void check_same_grid(const Volume& a, const Volume& b, const char* who) {
  if (!same_grid(a.geometry(), b.geometry(), kGridTolMm))
    throw GeometryError(std::string(who) + ": volumes are not on the same grid");
}

// Large finite stand-in for "no feature in reach"; keeps the parabola
// intersection arithmetic free of inf-inf.
constexpr double kFar = 1e30;

// 1D squared distance transform of a sampled function, samples at
// positions i*step (Felzenszwalb/Huttenlocher lower envelope). Sentinels
// in z are true infinities; f values are finite (kFar at most).
void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
          std::vector<double>& z, int n, double step) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double xq = q * step;
    double s = 0.0;
    for (;;) {
      double xv = v[k] * step;
      s = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2 * xq - 2 * xv);
      if (s <= z[k]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    double xq = q * step;
    while (z[k + 1] < xq) ++k;
    double dx = xq - v[k] * step;
    d[q] = dx * dx + f[v[k]];
  }
}

bool any_foreground(const Volume& mask) {
  for (double x : mask.voxels())
    if (x != 0.0) return true;
  return false;
}

std::string fmt6s(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"median", s.median}};
}

nlohmann::json metric_summary_json(const MetricSummary& m) {
  return {{"dice", summary_json(m.dice)},
          {"precision", summary_json(m.precision)},
          {"recall", summary_json(m.recall)},
          {"nsd", summary_json(m.nsd)}};
}

}  // namespace

ConfusionCounts confusion(const Volume& pred, const Volume& ref) {
  check_same_grid(pred, ref, "confusion");
  ConfusionCounts c;
  auto p = pred.voxels();
  auto r = ref.voxels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool pp = p[i] != 0.0;
    bool rr = r[i] != 0.0;
    if (pp && rr)
      ++c.tp;
    else if (pp)
      ++c.fp;
    else if (rr)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

OverlapScores overlap_scores(const ConfusionCounts& c) {
  OverlapScores s;
  if (c.tp + c.fp + c.fn == 0) {
    s.dice = s.precision = s.recall = 1.0;
    return s;
  }
  s.dice = 2.0 * static_cast<double>(c.tp) /
           static_cast<double>(2 * c.tp + c.fp + c.fn);
  s.precision = (c.tp + c.fp) == 0
                    ? 0.0
                    : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  s.recall = (c.tp + c.fn) == 0
                 ? 0.0
                 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return s;
}

Volume edt(const Volume& mask) {
  if (!any_foreground(mask))
    throw EmptyMaskError("edt: mask has no foreground");
  const auto& dims = mask.dims();
  const auto& sp = mask.spacing();
  const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];

  Volume out = Volume::intensity(mask.geometry(), DataType::Float64);
  auto d = out.voxels();
  auto m = mask.voxels();
  for (std::size_t i = 0; i < m.size(); ++i) d[i] = m[i] != 0.0 ? 0.0 : kFar;

  const int nmax = static_cast<int>(std::max({nx, ny, nz}));
  std::vector<double> f(nmax), g(nmax), z(nmax + 1);
  std::vector<int> v(nmax);

  // x rows
  for (std::int64_t zk = 0; zk < nz; ++zk)
    for (std::int64_t y = 0; y < ny; ++y) {
      std::size_t base = static_cast<std::size_t>(nx * (y + ny * zk));
      for (std::int64_t x = 0; x < nx; ++x) f[x] = d[base + x];
      dt1d(f, g, v, z, static_cast<int>(nx), sp[0]);
      for (std::int64_t x = 0; x < nx; ++x) d[base + x] = g[x];
    }
  // y columns
  for (std::int64_t zk = 0; zk < nz; ++zk)
    for (std::int64_t x = 0; x < nx; ++x) {
      std::size_t base = static_cast<std::size_t>(x + nx * ny * zk);
      for (std::int64_t y = 0; y < ny; ++y) f[y] = d[base + y * nx];
      dt1d(f, g, v, z, static_cast<int>(ny), sp[1]);
      for (std::int64_t y = 0; y < ny; ++y) d[base + y * nx] = g[y];
    }
  // z columns
  const std::int64_t plane = nx * ny;
  for (std::int64_t y = 0; y < ny; ++y)
    for (std::int64_t x = 0; x < nx; ++x) {
      std::size_t base = static_cast<std::size_t>(x + nx * y);
      for (std::int64_t zk = 0; zk < nz; ++zk) f[zk] = d[base + zk * plane];
      dt1d(f, g, v, z, static_cast<int>(nz), sp[2]);
      for (std::int64_t zk = 0; zk < nz; ++zk) d[base + zk * plane] = g[zk];
    }

  for (double& x : d) x = std::sqrt(x);
  return out;
}

Volume surface(const Volume& mask) {
  const auto& dims = mask.dims();
  const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];
  Volume out = Volume::label(mask.geometry(), DataType::UInt8);
  auto m = mask.voxels();
  auto o = out.voxels();
  std::size_t idx = 0;
  for (std::int64_t z = 0; z < nz; ++z)
    for (std::int64_t y = 0; y < ny; ++y)
      for (std::int64_t x = 0; x < nx; ++x, ++idx) {
        if (m[idx] == 0.0) continue;
        bool boundary = x == 0 || x == nx - 1 || y == 0 || y == ny - 1 || z == 0 ||
                        z == nz - 1;
        if (!boundary) {
          boundary = m[idx - 1] == 0.0 || m[idx + 1] == 0.0 ||
                     m[idx - nx] == 0.0 || m[idx + nx] == 0.0 ||
                     m[idx - nx * ny] == 0.0 || m[idx + nx * ny] == 0.0;
        }
        if (boundary) o[idx] = 1.0;
      }
  return out;
}

double nsd(const Volume& pred, const Volume& ref, double tau_mm) {
  check_same_grid(pred, ref, "nsd");
  if (!(tau_mm > 0.0)) throw ParameterError("nsd: tau must be positive");

  bool pred_any = any_foreground(pred);
  bool ref_any = any_foreground(ref);
  if (!pred_any && !ref_any) return 1.0;
  if (!pred_any || !ref_any) return 0.0;

  Volume sp = surface(pred);
  Volume sr = surface(ref);
  Volume dr = edt(sr);
  Volume dp = edt(sp);

  std::uint64_t hits = 0, total = 0;
  auto spv = sp.voxels();
  auto srv = sr.voxels();
  auto drv = dr.voxels();
  auto dpv = dp.voxels();
  for (std::size_t i = 0; i < spv.size(); ++i) {
    if (spv[i] != 0.0) {
      ++total;
      if (drv[i] <= tau_mm) ++hits;
    }
    if (srv[i] != 0.0) {
      ++total;
      if (dpv[i] <= tau_mm) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<StructureScore> evaluate_case(const Volume& pred, const Volume& ref,
                                          std::span<const std::int64_t> labels,
                                          double tau_mm) {
  check_same_grid(pred, ref, "evaluate_case");
  std::vector<StructureScore> scores;
  scores.reserve(labels.size());
  for (std::int64_t id : labels) {
    Volume bp = binarize(pred, id);
    Volume br = binarize(ref, id);
    ConfusionCounts c = confusion(bp, br);
    OverlapScores ov = overlap_scores(c);
    StructureScore s;
    s.label_id = id;
    s.tau_mm = tau_mm;
    s.dice = ov.dice;
    s.precision = ov.precision;
    s.recall = ov.recall;
    if (c.tp + c.fp + c.fn == 0) {
      s.nsd = 1.0;
      s.absent_in_both = true;
    } else {
      s.nsd = nsd(bp, br, tau_mm);
    }
    scores.push_back(s);
  }
  return scores;
}

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw EmptyInputError("summarize: no values");
  // summing in sorted order makes the aggregate independent of the
  // caller's score ordering
  std::sort(values.begin(), values.end());
  Summary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  std::size_t n = values.size();
  s.median = n % 2 == 1 ? values[n / 2]
                        : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

MetricsAggregate aggregate(std::span<const StructureScore> scores) {
  if (scores.empty()) throw EmptyInputError("aggregate: no scores");
  MetricsAggregate agg;
  agg.scored = scores.size();

  std::map<std::int64_t, std::vector<const StructureScore*>> by_label;
  for (const auto& s : scores) by_label[s.label_id].push_back(&s);

  auto summary_of = [](const std::vector<const StructureScore*>& group) {
    MetricSummary ms;
    std::vector<double> d, p, r, n;
    for (const auto* s : group) {
      d.push_back(s->dice);
      p.push_back(s->precision);
      r.push_back(s->recall);
      n.push_back(s->nsd);
    }
    ms.dice = summarize(std::move(d));
    ms.precision = summarize(std::move(p));
    ms.recall = summarize(std::move(r));
    ms.nsd = summarize(std::move(n));
    return ms;
  };

  for (const auto& [id, group] : by_label) agg.per_label[id] = summary_of(group);
  std::vector<const StructureScore*> all;
  all.reserve(scores.size());
  for (const auto& s : scores) all.push_back(&s);
  agg.overall = summary_of(all);

  for (const auto& s : scores) {
    if (s.dice >= 0.90)
      ++agg.bins.high;
    else if (s.dice >= 0.80)
      ++agg.bins.mid;
    else
      ++agg.bins.low;
  }
  return agg;
}

MetricsReport build_report(std::vector<CaseScores> cases, double tau_mm) {
  std::sort(cases.begin(), cases.end(),
            [](const CaseScores& a, const CaseScores& b) { return a.case_id < b.case_id; });
  for (auto& c : cases)
    std::sort(c.scores.begin(), c.scores.end(),
              [](const StructureScore& a, const StructureScore& b) {
                return a.label_id < b.label_id;
              });
  MetricsReport r;
  r.tau_mm = tau_mm;
  std::vector<StructureScore> all;
  for (const auto& c : cases)
    all.insert(all.end(), c.scores.begin(), c.scores.end());
  r.totals = aggregate(all);
  r.cases = std::move(cases);
  return r;
}

std::string report_json(const MetricsReport& r,
                        const std::map<std::int64_t, std::string>& label_names) {
  auto name_of = [&](std::int64_t id) {
    auto it = label_names.find(id);
    return it == label_names.end() ? "label_" + std::to_string(id) : it->second;
  };
  nlohmann::json j;
  j["tau_mm"] = r.tau_mm;
  j["conventions"] = {
      {"absent_in_both", "dice and nsd score 1.0 and the entry is flagged"},
      {"one_side_empty", "dice and nsd score 0.0"}};
  j["cases"] = nlohmann::json::array();
  for (const auto& c : r.cases) {
    nlohmann::json cj;
    cj["case_id"] = c.case_id;
    cj["structures"] = nlohmann::json::array();
    for (const auto& s : c.scores) {
      cj["structures"].push_back({{"label_id", s.label_id},
                                  {"label_name", name_of(s.label_id)},
                                  {"dice", s.dice},
                                  {"precision", s.precision},
                                  {"recall", s.recall},
                                  {"nsd", s.nsd},
                                  {"absent_in_both", s.absent_in_both}});
    }
    j["cases"].push_back(std::move(cj));
  }
  j["aggregates"]["overall"] = metric_summary_json(r.totals.overall);
  j["aggregates"]["per_label"] = nlohmann::json::object();
  for (const auto& [id, ms] : r.totals.per_label) {
    nlohmann::json entry = metric_summary_json(ms);
    entry["label_name"] = name_of(id);
    j["aggregates"]["per_label"][std::to_string(id)] = std::move(entry);
  }
  j["bins"] = {{"dice_ge_0.90", r.totals.bins.high},
               {"dice_0.80_to_0.90", r.totals.bins.mid},
               {"dice_lt_0.80", r.totals.bins.low}};
  j["scored_structures"] = r.totals.scored;
  return j.dump(2);
}

std::string report_csv(const MetricsReport& r,
                       const std::map<std::int64_t, std::string>& label_names) {
  auto name_of = [&](std::int64_t id) {
    auto it = label_names.find(id);
    return it == label_names.end() ? "label_" + std::to_string(id) : it->second;
  };
  std::ostringstream os;
  os << "case_id,label_id,label_name,dice,precision,recall,nsd\n";
  for (const auto& c : r.cases)
    for (const auto& s : c.scores)
      os << c.case_id << ',' << s.label_id << ',' << name_of(s.label_id) << ','
         << fmt6s(s.dice) << ',' << fmt6s(s.precision) << ',' << fmt6s(s.recall)
         << ',' << fmt6s(s.nsd) << '\n';
  return os.str();
}

}  // namespace segpipe
