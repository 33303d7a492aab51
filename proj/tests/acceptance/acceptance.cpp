// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed below.
//
//   acceptance [--report FILE] [--only 1,3,...]
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cutstokes/cutstokes.hpp"

using namespace cutstokes;

namespace {

// criterion 1
constexpr double kBdf1RateMin = 0.8, kBdf1RateMax = 1.2;
// criterion 2
constexpr double kSpatialL2Min = 1.9, kSpatialH1Min = 1.5, kDominanceFactor = 2.0;
// criterion 3
constexpr double kBdf2RateMin = 1.7, kBdf2RateMax = 2.3;
// criterion 4
constexpr double kViscousGrowthMax = 100.0, kPenaltyGrowthMax = 10.0;
// criterion 5
constexpr double kSubdivisionRateMin = 2.7;
// criterion 7
constexpr double kVerifyBudgetSeconds = 60.0;
// criterion 8
constexpr double kFittedVelocityRateMin = 2.8, kFittedPressureRateMin = 1.8;

constexpr double kH0 = 0.2, kDt0 = 0.1;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

std::string join(const std::vector<double>& v, int digits = 2) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fixed(v[i], digits);
  return s;
}

bool all_in(const std::vector<double>& v, double lo, double hi) {
  for (double x : v)
    if (!(x >= lo && x <= hi)) return false;
  return true;
}

/// Benchmark runs, cached so criteria sharing a run do not repeat it.
class RunCache {
 public:
  struct Key {
    double h, dt, nu, gamma;
    int bdf, s;
    auto operator<=>(const Key&) const = default;
  };

  const ErrorReport& get(const Key& k) {
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    StepConfig c;
    c.h = k.h;
    c.dt = k.dt;
    c.nu = k.nu;
    c.gamma_s = k.gamma;
    c.bdf_order = k.bdf;
    c.subdivision = k.s;
    const auto start = std::chrono::steady_clock::now();
    auto r = run(c, moving_disk_case(k.nu));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "  run h=" << k.h << " dt=" << k.dt << " bdf" << k.bdf << " s=" << k.s << " nu=" << k.nu
              << " gamma_s=" << k.gamma << ": l2(L2) u " << sci(r.errors.velocity_l2l2) << ", l2(H1) u "
              << sci(r.errors.velocity_l2h1) << ", l2(L2) p " << sci(r.errors.pressure_l2l2) << " (" << fixed(secs, 1)
              << " s)\n";
    return cache_.emplace(k, std::move(r.errors)).first->second;
  }

 private:
  std::map<Key, ErrorReport> cache_;
};

RunCache runs;

double dt_level(int i) { return kDt0 * std::ldexp(1.0, -i); }
double h_level(int i) { return kH0 * std::ldexp(1.0, -i); }

std::vector<double> norm_of(const std::vector<const ErrorReport*>& r, int which) {
  std::vector<double> out;
  for (const auto* e : r) out.push_back(which == 0 ? e->velocity_l2l2 : which == 1 ? e->velocity_l2h1 : e->pressure_l2l2);
  return out;
}

Outcome bdf1_temporal() {
  std::vector<const ErrorReport*> r;
  for (int i = 3; i <= 6; ++i) r.push_back(&runs.get({h_level(3), dt_level(i), 1e-2, 1.0, 1, 0}));
  Outcome o{true, {}};
  const char* names[] = {"l2(L2) u", "l2(H1) u", "l2(L2) p"};
  for (int n = 0; n < 3; ++n) {
    const auto rates = eoc(norm_of(r, n));
    o.passed = o.passed && all_in(rates, kBdf1RateMin, kBdf1RateMax);
    o.detail += std::string(n ? "; " : "") + names[n] + " eoc_t " + join(rates);
  }
  o.detail += " (need [" + fixed(kBdf1RateMin, 1) + ", " + fixed(kBdf1RateMax, 1) + "])";
  return o;
}

Outcome bdf1_spatial() {
  const double dt = dt_level(6);
  std::vector<const ErrorReport*> r;
  for (int i = 0; i <= 3; ++i) r.push_back(&runs.get({h_level(i), dt, 1e-2, 1.0, 1, 0}));
  // Temporal-only level at dt: the finest-mesh error difference between dt and 2 dt.
  const auto& coarse_t = runs.get({h_level(3), 2.0 * dt, 1e-2, 1.0, 1, 0});
  Outcome o{true, {}};
  const char* names[] = {"l2(L2) u", "l2(H1) u"};
  const double need[] = {kSpatialL2Min, kSpatialH1Min};
  for (int n = 0; n < 2; ++n) {
    const auto e = norm_of(r, n);
    const double et = std::abs(norm_of({&coarse_t}, n)[0] - e.back());
    const auto rates = eoc(e);
    std::vector<double> counted;
    for (std::size_t i = 0; i < rates.size(); ++i)
      if (e[i + 1] >= kDominanceFactor * et) counted.push_back(rates[i]);
    const bool ok = !counted.empty() && all_in(counted, need[n], INFINITY);
    o.passed = o.passed && ok;
    o.detail += std::string(n ? "; " : "") + names[n] + " eoc_x " + join(rates) + ", temporal level " + sci(et) +
                ", spatially dominated pairs " + std::to_string(counted.size()) + " with eoc " + join(counted) +
                " (need >= " + fixed(need[n], 1) + ")";
  }
  return o;
}

Outcome bdf2_temporal() {
  std::vector<const ErrorReport*> r;
  for (int i = 1; i <= 4; ++i) r.push_back(&runs.get({h_level(3), dt_level(i), 1e-2, 1.0, 2, 0}));
  const auto rates = eoc(norm_of(r, 0));
  return {all_in(rates, kBdf2RateMin, kBdf2RateMax), "l2(L2) u errors " + [&] {
            std::string s;
            for (double e : norm_of(r, 0)) s += sci(e) + " ";
            return s;
          }() + "eoc_t " + join(rates) + " (need [" + fixed(kBdf2RateMin, 1) + ", " + fixed(kBdf2RateMax, 1) + "])"};
}

Outcome robustness() {
  StudyOptions opt;
  opt.robustness_h = {0.1};
  opt.robustness_dt = 0.05;
  const auto table = run_study(StudyKind::Robustness, opt);
  int failed = 0;
  auto find = [&](double nu, double gamma) -> const StudyRow* {
    for (const auto& r : table.rows)
      if (r.cell.config.nu == nu && r.cell.config.gamma_s == gamma) return &r;
    return nullptr;
  };
  std::ostringstream grid;
  for (const auto& r : table.rows) {
    failed += !r.ok;
    if (!r.ok) std::cerr << "  cell nu=" << r.cell.config.nu << " gamma=" << r.cell.config.gamma_s << " failed: " << r.failure << '\n';
  }
  for (double nu : opt.robustness_nu) {
    grid << "    nu=" << std::setw(6) << nu << ":";
    for (double g : opt.robustness_gamma) grid << ' ' << sci(find(nu, g)->l2l2_u);
    grid << '\n';
  }
  std::cerr << "  l2(L2) velocity, gamma_s = 0.1 ... 1000 across:\n" << grid.str();
  const auto* base = find(1.0, 0.1);
  const auto* viscous = find(1e-4, 0.1);
  const auto* penalty = find(1.0, 1000.0);
  if (failed > 0 || !base->ok || !viscous->ok || !penalty->ok)
    return {false, std::to_string(failed) + " of 25 cells failed"};
  const double gv = viscous->l2l2_u / base->l2l2_u, gp = penalty->l2l2_u / base->l2l2_u;
  return {gv <= kViscousGrowthMax && gp <= kPenaltyGrowthMax,
          "25/25 solves ok; e(nu=1e-4)/e(nu=1) = " + fixed(gv, 1) + " (need <= " + fixed(kViscousGrowthMax, 0) +
              "), e(gamma=1000)/e(gamma=0.1) = " + fixed(gp, 2) + " (need <= " + fixed(kPenaltyGrowthMax, 0) + ")"};
}

Outcome subdivision() {
  const double dt = dt_level(6);
  std::vector<const ErrorReport*> r;
  std::vector<int> levels;
  for (int i = 0; i <= 3; ++i) {
    const int s = subdivision_schedule(kH0, h_level(i), 1);
    levels.push_back(s);
    r.push_back(&runs.get({h_level(i), dt, 1e-2, 1.0, 2, s}));
  }
  const auto e = norm_of(r, 0);
  const auto rates = eoc(e);
  // temporal dominance monitor on the finest mesh
  const double et = std::abs(runs.get({h_level(3), 2.0 * dt, 1e-2, 1.0, 2, levels.back()}).velocity_l2l2 - e.back());
  std::string s;
  for (int l : levels) s += std::to_string(l) + " ";
  return {all_in(rates, kSubdivisionRateMin, INFINITY),
          "s = " + s + "l2(L2) u eoc " + join(rates) + " (need >= " + fixed(kSubdivisionRateMin, 1) +
              "); finest error " + sci(e.back()) + " vs temporal level " + sci(et)};
}

Outcome geometry() {
  const auto r = verify::disk_area_convergence();
  return {r.passed, r.detail};
}

Outcome property_suite() {
  const auto start = std::chrono::steady_clock::now();
  const auto results = verify::run_all();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  int failed = 0;
  std::string names;
  for (const auto& r : results) {
    std::cerr << "  [" << (r.passed ? "ok" : "FAILED") << "] " << r.name << ": " << r.detail << '\n';
    if (!r.passed) {
      ++failed;
      names += " " + r.name;
    }
  }
  return {failed == 0 && secs < kVerifyBudgetSeconds,
          std::to_string(results.size() - failed) + "/" + std::to_string(results.size()) + " checks in " +
              fixed(secs, 1) + " s (budget " + fixed(kVerifyBudgetSeconds, 0) + " s)" +
              (failed ? "; failed:" + names : std::string())};
}

Outcome fitted_stokes() {
  const auto mc = fitted_square_case(1.0);
  std::vector<double> eu, ep;
  for (int n : {4, 8, 16, 32}) {
    const auto mesh = build_structured_mesh(mc.box, 1.0 / n);
    const auto cut = fitted_decomposition(mesh, 6);
    auto active = extract_active_sets(mesh, cut, 0.0);
    active.facets_velocity_gp.clear();
    active.facets_pressure_gp.clear();
    const auto layout = build_layout(mesh, active, 2);
    FormParams params;
    params.nu = 1.0;
    const auto blocks = assemble_blocks(cut, active, layout, params, mc.forcing, 0.0);
    const auto sol = solve(build_system(blocks, params, 0.0));
    const auto e = step_errors(cut, &sol.u, &sol.p, mc, 0.0, 8);
    eu.push_back(e.velocity_l2);
    ep.push_back(e.pressure_l2);
  }
  const auto ru = eoc(eu), rp = eoc(ep);
  return {all_in(ru, kFittedVelocityRateMin, INFINITY) && all_in(rp, kFittedPressureRateMin, INFINITY),
          "h = sqrt(2)/n, n = 4..32: L2 u eoc " + join(ru) + " (need >= " + fixed(kFittedVelocityRateMin, 1) +
              "), L2 p eoc " + join(rp) + " (need >= " + fixed(kFittedPressureRateMin, 1) + ")"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  std::string report_path;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--report") && i + 1 < argc) {
      report_path = argv[++i];
    } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    } else {
      std::cerr << "usage: acceptance [--report FILE] [--only 1,2,...]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {8, "fitted Taylor-Hood Stokes orders", fitted_stokes},
      {6, "cut-quadrature disk area", geometry},
      {7, "property suite", property_suite},
      {4, "viscosity/stabilization robustness", robustness},
      {1, "BDF1 temporal convergence", bdf1_temporal},
      {2, "BDF1 spatial convergence", bdf1_spatial},
      {3, "BDF2 temporal convergence", bdf2_temporal},
      {5, "subdivision recovers higher order", subdivision},
  };

  std::map<int, std::string> lines;
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::cerr << "criterion " << c.id << ": " << c.name << '\n';
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.passed;
    std::ostringstream line;
    line << (o.passed ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
         << fixed(secs, 1) << " s]";
    lines[c.id] = line.str();
    std::cout << line.str() << std::endl;
  }

  std::cout << "\nsummary:\n";
  for (const auto& [id, l] : lines) std::cout << l << '\n';
  std::cout << lines.size() - failed << '/' << lines.size() << " criteria passed\n";
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    for (const auto& [id, l] : lines) out << l << '\n';
    out << lines.size() - failed << '/' << lines.size() << " criteria passed\n";
  }
  return failed == 0 ? 0 : 1;
}
