#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cutstokes/errors.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/stepper.hpp"

namespace cutstokes {

enum class StudyKind { Robustness, Bdf1Convergence, Bdf2Convergence, Subdivision };

inline StudyKind parse_study_kind(const std::string& s) {
  if (s == "robustness") return StudyKind::Robustness;
  if (s == "bdf1" || s == "bdf1_convergence") return StudyKind::Bdf1Convergence;
  if (s == "bdf2" || s == "bdf2_convergence") return StudyKind::Bdf2Convergence;
  if (s == "subdivision") return StudyKind::Subdivision;
  throw std::invalid_argument("unknown study '" + s + "'");
}

/// Grid extents. Defaults reproduce the full tables; shrink them for desk runs.
struct StudyOptions {
  StepConfig base;  // nu, gamma_s, k, c_delta, ... shared by all cells
  double h0 = 0.2;
  double dt0 = 0.1;
  int lt_min = 0, lt_max = -1;  // -1: study default
  int lx_min = 0, lx_max = -1;
  std::vector<double> robustness_h{0.1};
  std::vector<double> robustness_nu{1.0, 1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> robustness_gamma{0.1, 1.0, 10.0, 100.0, 1000.0};
  double robustness_dt = 0.05;
  std::vector<int> subdivision_k{2, 3};
  double subdivision_dt = 0.1 / 64.0;
  int subdivision_s0 = 1;
  int jobs = 1;
  bool reproducible = false;
  std::ostream* progress = nullptr;
};

struct StudyCell {
  StepConfig config;
  int lt = -1;  // temporal level, -1 if not a temporal grid
  int lx = -1;  // spatial level
  int group = 0;  // cells sharing a group form one eoc sequence in the spatial direction
};

struct StudyRow {
  StudyCell cell;
  bool ok = false;
  std::string failure;
  double l2l2_u = 0.0, l2h1_u = 0.0, l2l2_p = 0.0;
  int strip_rings = 0;
  double wall_time_s = 0.0;
  int dof_count = 0;
  // eoc fields; NaN when undefined
  double eoc_t[3] = {NAN, NAN, NAN};
  double eoc_x[3] = {NAN, NAN, NAN};
  double eoc_xt[3] = {NAN, NAN, NAN};
};

struct StudyTable {
  StudyKind kind;
  std::vector<StudyRow> rows;
};

inline std::vector<StudyCell> study_cells(StudyKind kind, const StudyOptions& o) {
  std::vector<StudyCell> cells;
  auto grid = [&](int bdf, int lt_default, int lx_default) {
    const int lt_max = o.lt_max >= 0 ? o.lt_max : lt_default;
    const int lx_max = o.lx_max >= 0 ? o.lx_max : lx_default;
    for (int lt = o.lt_min; lt <= lt_max; ++lt)
      for (int lx = o.lx_min; lx <= lx_max; ++lx) {
        StudyCell c;
        c.config = o.base;
        c.config.bdf_order = bdf;
        c.config.h = o.h0 * std::ldexp(1.0, -lx);
        c.config.dt = o.dt0 * std::ldexp(1.0, -lt);
        c.lt = lt;
        c.lx = lx;
        cells.push_back(c);
      }
  };
  switch (kind) {
    case StudyKind::Robustness: {
      int g = 0;
      for (double h : o.robustness_h) {
        for (double nu : o.robustness_nu)
          for (double gamma : o.robustness_gamma) {
            StudyCell c;
            c.config = o.base;
            c.config.bdf_order = 1;
            c.config.h = h;
            c.config.dt = o.robustness_dt;
            c.config.nu = nu;
            c.config.gamma_s = gamma;
            c.group = g;
            cells.push_back(c);
          }
        ++g;
      }
      break;
    }
    case StudyKind::Bdf1Convergence:
      grid(1, 8, 4);
      break;
    case StudyKind::Bdf2Convergence:
      grid(2, 7, 5);
      break;
    case StudyKind::Subdivision: {
      const int lx_max = o.lx_max >= 0 ? o.lx_max : 3;
      for (int k : o.subdivision_k)
        for (int lx = o.lx_min; lx <= lx_max; ++lx) {
          StudyCell c;
          c.config = o.base;
          c.config.k = k;
          c.config.sigma = 0.0;
          c.config.bdf_order = 2;
          c.config.dt = o.subdivision_dt;
          c.config.h = o.h0 * std::ldexp(1.0, -lx);
          c.config.subdivision = subdivision_schedule(o.h0, c.config.h, o.subdivision_s0);
          c.lx = lx;
          c.group = k;
          cells.push_back(c);
        }
      break;
    }
  }
  return cells;
}

inline StudyRow run_cell(const StudyCell& cell) {
  StudyRow row;
  row.cell = cell;
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto mcase = moving_disk_case(cell.config.nu);
    auto cfg = cell.config;
    cfg.final_time = mcase.final_time;
    cfg.log = nullptr;
    const auto r = run(cfg, mcase);
    row.ok = true;
    row.l2l2_u = r.errors.velocity_l2l2;
    row.l2h1_u = r.errors.velocity_l2h1;
    row.l2l2_p = r.errors.pressure_l2l2;
    row.strip_rings = r.final_state.active->strip_rings;
    row.dof_count = r.max_dofs;
  } catch (const std::exception& e) {
    row.ok = false;
    row.failure = e.what();
  }
  row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

namespace detail {

inline void fill_rate(double (&out)[3], const StudyRow& coarse, const StudyRow& fine) {
  if (!coarse.ok || !fine.ok) return;
  const double a[3] = {coarse.l2l2_u, coarse.l2h1_u, coarse.l2l2_p};
  const double b[3] = {fine.l2l2_u, fine.l2h1_u, fine.l2l2_p};
  for (int i = 0; i < 3; ++i)
    if (a[i] > 0.0 && b[i] > 0.0) out[i] = std::log2(a[i] / b[i]);
}

}  // namespace detail

/// Rates between neighbouring cells: eoc_t along lt, eoc_x along lx (or along
/// h within a group), eoc_xt along the diagonal.
inline void compute_rates(StudyTable& t) {
  auto find = [&](int lt, int lx, int group) -> const StudyRow* {
    for (const auto& r : t.rows)
      if (r.cell.lt == lt && r.cell.lx == lx && r.cell.group == group) return &r;
    return nullptr;
  };
  for (auto& r : t.rows) {
    if (r.cell.lx < 0) continue;
    if (r.cell.lt >= 0)
      if (const auto* p = find(r.cell.lt - 1, r.cell.lx, r.cell.group)) detail::fill_rate(r.eoc_t, *p, r);
    if (const auto* p = find(r.cell.lt, r.cell.lx - 1, r.cell.group)) detail::fill_rate(r.eoc_x, *p, r);
    if (r.cell.lt >= 0)
      if (const auto* p = find(r.cell.lt - 1, r.cell.lx - 1, r.cell.group)) detail::fill_rate(r.eoc_xt, *p, r);
  }
}

/// Runs all cells on `jobs` worker threads; row order follows the cell order.
inline StudyTable run_study(StudyKind kind, const StudyOptions& o) {
  const auto cells = study_cells(kind, o);
  StudyTable table{kind, std::vector<StudyRow>(cells.size())};
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      table.rows[i] = run_cell(cells[i]);
      if (o.progress != nullptr) {
        std::lock_guard lock(log_mutex);
        const auto& r = table.rows[i];
        *o.progress << "cell " << i + 1 << '/' << cells.size() << " h=" << r.cell.config.h << " dt=" << r.cell.config.dt
                    << " nu=" << r.cell.config.nu << " gamma_s=" << r.cell.config.gamma_s << " k=" << r.cell.config.k
                    << (r.ok ? " ok" : " FAILED: " + r.failure) << '\n';
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(o.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  compute_rates(table);
  return table;
}

inline void write_study_csv(std::ostream& os, const StudyTable& t, bool reproducible) {
  auto num = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  os << "h,dt,nu,gamma_s,k,s,bdf_order,L,lt,lx,status,err_l2l2_u,err_l2h1_u,err_l2l2_p,"
        "eoc_t_l2l2_u,eoc_t_l2h1_u,eoc_t_l2l2_p,eoc_x_l2l2_u,eoc_x_l2h1_u,eoc_x_l2l2_p,"
        "eoc_xt_l2l2_u,eoc_xt_l2h1_u,eoc_xt_l2l2_p,wall_time_s,dof_count\n";
  for (const auto& r : t.rows) {
    const auto& c = r.cell.config;
    os << num(c.h) << ',' << num(c.dt) << ',' << num(c.nu) << ',' << num(c.gamma_s) << ',' << c.k << ','
       << c.subdivision << ',' << c.bdf_order << ',' << r.strip_rings << ',' << r.cell.lt << ',' << r.cell.lx << ',';
    if (r.ok) {
      os << "ok," << num(r.l2l2_u) << ',' << num(r.l2h1_u) << ',' << num(r.l2l2_p);
    } else {
      std::string msg = r.failure;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << "failed: " << msg << ",,,";
    }
    for (const auto* arr : {r.eoc_t, r.eoc_x, r.eoc_xt})
      for (int i = 0; i < 3; ++i) os << ',' << num(arr[i]);
    os << ',' << (reproducible ? std::string("NA") : num(r.wall_time_s)) << ',' << r.dof_count << '\n';
  }
}

}  // namespace cutstokes
