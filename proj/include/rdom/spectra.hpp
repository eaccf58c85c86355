#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "rdom/core.hpp"
#include "rdom/model.hpp"

namespace rdom {

enum class SpectrumSource {
  two_mode_closed_form,
  numeric,
  ring_circulant,
  ring_as_published,
};

inline std::string to_string(SpectrumSource s) {
  switch (s) {
    case SpectrumSource::two_mode_closed_form: return "two_mode_closed_form";
    case SpectrumSource::numeric: return "numeric";
    case SpectrumSource::ring_circulant: return "ring_circulant";
    case SpectrumSource::ring_as_published: return "ring_as_published";
  }
  return "unknown";
}

/// Complex eigenfrequencies: real part is the supermode frequency, imaginary
/// part minus the linewidth.
template <typename Scalar>
struct Spectrum {
  std::vector<Complex<Scalar>> eigenvalues;
  std::vector<int> branch_ids;
  SpectrumSource source = SpectrumSource::numeric;

  std::size_t size() const { return eigenvalues.size(); }
};

enum class Parity { odd, even };

inline std::string to_string(Parity p) { return p == Parity::odd ? "odd" : "even"; }

inline Parity parity_of(long long n) { return n % 2 != 0 ? Parity::odd : Parity::even; }

struct PhaseMatch {
  long long n = 0;
  Parity parity = Parity::odd;
};

template <typename Scalar>
struct EpRecord {
  Scalar theta_star = 0;
  Scalar j_over_g = 0;
  long long n = 0;
  Parity parity = Parity::odd;
  Scalar eigengap = 0;
  int order = 2;
  std::string source = "two_mode";
};

/// Eigenvalues over a (theta, J/G) grid, stored row-major with theta as the
/// outer axis. `raw` keeps the principal-branch order at every point; `tracked`
/// is reordered so that index k follows one continuous sheet along theta.
/// raw[i].branch_ids[k] names the sheet raw eigenvalue k was assigned to.
template <typename Scalar>
struct SheetGrid {
  std::vector<Scalar> theta_axis;
  std::vector<Scalar> ratio_axis;
  std::vector<Spectrum<Scalar>> raw;
  std::vector<Spectrum<Scalar>> tracked;

  std::size_t index(std::size_t it, std::size_t ir) const {
    return it * ratio_axis.size() + ir;
  }
};

// ---------------------------------------------------------------------------
// Two-mode closed form

/// (i J e^{-i theta} + G)(i J e^{i theta} + G), evaluated as the product.
template <typename Scalar>
Complex<Scalar> coupling_product(const EffectiveParams<Scalar>& p) {
  return coupling_ab(p.G, p.J, p.theta) * coupling_ba(p.G, p.J, p.theta);
}

/// lambda_+/- = omega - i kappa +/- sqrt(coupling product), principal root.
template <typename Scalar>
Spectrum<Scalar> eig2_closed(const EffectiveParams<Scalar>& p) {
  const Complex<Scalar> center(p.omega, -p.kappa());
  const Complex<Scalar> root = std::sqrt(coupling_product(p));
  return {{center + root, center - root}, {0, 1}, SpectrumSource::two_mode_closed_form};
}

/// |lambda_+ - lambda_-|.
template <typename Scalar>
Scalar eigengap(const EffectiveParams<Scalar>& p) {
  return Scalar(2) * std::sqrt(std::abs(coupling_product(p)));
}

// ---------------------------------------------------------------------------
// Numeric and ring spectra

template <typename Scalar>
Spectrum<Scalar> eig_numeric(const CoefficientMatrix<Scalar>& cm) {
  cm.validate();
  Eigen::ComplexEigenSolver<MatrixX<Scalar>> solver(cm.m, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
  Spectrum<Scalar> s;
  s.source = SpectrumSource::numeric;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
    s.eigenvalues.push_back(solver.eigenvalues()(i));
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(),
            [](const auto& a, const auto& b) {
              return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
            });
  s.branch_ids.resize(s.eigenvalues.size());
  std::iota(s.branch_ids.begin(), s.branch_ids.end(), 0);
  return s;
}

/// DFT diagonalization: lambda_k = (omega - i kappa) + c1 w^k + c2 conj(w)^k.
template <typename Scalar>
Spectrum<Scalar> ring_eig_circulant(const RingParams<Scalar>& p) {
  p.validate();
  const Complex<Scalar> d(p.omega, -p.kappa);
  const Complex<Scalar> c1 = coupling_ab(p.G, p.J, p.theta);
  const Complex<Scalar> c2 = coupling_ba(p.G, p.J, p.theta);
  Spectrum<Scalar> s;
  s.source = SpectrumSource::ring_circulant;
  for (int k = 0; k < 3; ++k) {
    const Complex<Scalar> w =
        k == 0 ? Complex<Scalar>(1) : std::polar(Scalar(1), two_pi<Scalar> * k / Scalar(3));
    s.eigenvalues.push_back(d + c1 * w + c2 * std::conj(w));
    s.branch_ids.push_back(k);
  }
  return s;
}

/// The published three-mode closed forms: omega - i kappa and
/// omega - i kappa +/- sqrt(G^2 - J^2 + i J G (e^{i theta} + e^{-i theta})).
/// These do not solve the characteristic polynomial of the ring matrix; see
/// ring_discrepancy().
template <typename Scalar>
Spectrum<Scalar> ring_eig_paper(const RingParams<Scalar>& p) {
  p.validate();
  const Complex<Scalar> i(0, 1);
  const Complex<Scalar> d(p.omega, -p.kappa);
  const Complex<Scalar> radicand =
      (p.G * p.G - p.J * p.J) + i * p.J * p.G * (unit_phasor(p.theta) + unit_phasor(-p.theta));
  const Complex<Scalar> root = std::sqrt(radicand);
  return {{d, d + root, d - root}, {0, 1, 2}, SpectrumSource::ring_as_published};
}

// ---------------------------------------------------------------------------
// Branch matching

/// Permutation perm minimizing sum_k |reference[k] - candidate[perm[k]]|; ties
/// go to the permutation with the smaller real-part mismatch.
template <typename Scalar>
std::vector<std::size_t> match_branches(const std::vector<Complex<Scalar>>& reference,
                                        const std::vector<Complex<Scalar>>& candidate) {
  const std::size_t n = reference.size();
  if (candidate.size() != n) throw ValidationError("branch count mismatch");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  Scalar best_cost = 0;
  Scalar best_real = 0;
  bool first = true;
  do {
    Scalar cost = 0;
    Scalar real = 0;
    for (std::size_t k = 0; k < n; ++k) {
      cost += std::abs(reference[k] - candidate[perm[k]]);
      real += std::abs(reference[k].real() - candidate[perm[k]].real());
    }
    const Scalar slack = std::numeric_limits<Scalar>::epsilon() * Scalar(16) *
                         std::max(Scalar(1), best_cost);
    if (first || cost < best_cost - slack ||
        (std::abs(cost - best_cost) <= slack && real < best_real)) {
      first = false;
      best_cost = cost;
      best_real = real;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Reorders each spectrum to continue the previous one (nearest neighbour).
/// Returns the tracked sequence; raw branch_ids are updated in place.
template <typename Scalar>
std::vector<Spectrum<Scalar>> track_branches(std::vector<Spectrum<Scalar>>& raw) {
  std::vector<Spectrum<Scalar>> tracked;
  tracked.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& r = raw[i];
    const std::size_t n = r.size();
    Spectrum<Scalar> t;
    t.source = r.source;
    t.eigenvalues.resize(n);
    t.branch_ids.resize(n);
    std::iota(t.branch_ids.begin(), t.branch_ids.end(), 0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    if (i > 0) perm = match_branches(tracked.back().eigenvalues, r.eigenvalues);
    r.branch_ids.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
      t.eigenvalues[k] = r.eigenvalues[perm[k]];
      r.branch_ids[perm[k]] = static_cast<int>(k);
    }
    tracked.push_back(std::move(t));
  }
  return tracked;
}

namespace detail {
template <typename Scalar>
void require_increasing(const std::vector<Scalar>& grid, const char* name) {
  if (grid.empty()) throw ValidationError(std::string(name) + " grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]))
      throw ValidationError(std::string(name) + " grid has a non-finite value");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw ValidationError(std::string(name) + " grid must be strictly increasing");
  }
}
}  // namespace detail

/// Two-mode eigenvalues over (theta, J/G), with sheets tracked along theta.
template <typename Scalar>
SheetGrid<Scalar> sweep_riemann(const EffectiveParams<Scalar>& model,
                                const std::vector<Scalar>& theta_grid,
                                const std::vector<Scalar>& ratio_grid) {
  detail::require_increasing(theta_grid, "theta");
  detail::require_increasing(ratio_grid, "J/G");
  SheetGrid<Scalar> out;
  out.theta_axis = theta_grid;
  out.ratio_axis = ratio_grid;
  out.raw.resize(theta_grid.size() * ratio_grid.size());
  out.tracked.resize(out.raw.size());
  for (std::size_t ir = 0; ir < ratio_grid.size(); ++ir) {
    std::vector<Spectrum<Scalar>> column;
    column.reserve(theta_grid.size());
    for (Scalar theta : theta_grid)
      column.push_back(eig2_closed(model.retuned(ratio_grid[ir] * model.G, theta)));
    auto tracked = track_branches(column);
    for (std::size_t it = 0; it < theta_grid.size(); ++it) {
      out.raw[out.index(it, ir)] = std::move(column[it]);
      out.tracked[out.index(it, ir)] = std::move(tracked[it]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exceptional points

inline constexpr double coalescence_tolerance = 1e-6;  // relative to G
inline constexpr double phase_tolerance = 1e-9;        // radians

/// theta = (2n - 1) pi / 2 within phase_tolerance, else nullopt.
template <typename Scalar>
std::optional<PhaseMatch> classify_parity(Scalar theta) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar r = std::fmod(theta, pi);
  if (r < 0) r += pi;
  if (std::abs(r - half_pi<Scalar>) > Scalar(phase_tolerance)) return std::nullopt;
  const long long n = std::llround((theta / half_pi<Scalar> + Scalar(1)) / Scalar(2));
  return PhaseMatch{n, parity_of(n)};
}

template <typename Scalar>
struct SearchBox {
  Scalar theta_min = 0;
  Scalar theta_max = 4 * std::numbers::pi_v<Scalar>;
  Scalar ratio_min = Scalar(0.5);
  Scalar ratio_max = Scalar(1.5);
  std::size_t theta_points = 401;
  std::size_t ratio_points = 401;

  void validate() const {
    if (!(theta_max >= theta_min) || !(ratio_max >= ratio_min))
      throw ValidationError("search box bounds are inverted");
    if (!(ratio_min >= 0)) throw ValidationError("search box J/G must be >= 0");
    if (theta_points < 2 || ratio_points < 2)
      throw ValidationError("search box needs at least 2 points per axis");
  }
};

template <typename Scalar>
std::vector<Scalar> linspace(Scalar from, Scalar to, std::size_t points) {
  std::vector<Scalar> out(points);
  if (points == 1) {
    out[0] = from;
    return out;
  }
  const Scalar step = (to - from) / Scalar(points - 1);
  for (std::size_t i = 0; i < points; ++i) out[i] = from + step * Scalar(i);
  out.back() = to;
  return out;
}

/// Minimizes a unimodal f on [lo, hi].
template <typename Scalar, typename F>
Scalar golden_section_minimize(F&& f, Scalar lo, Scalar hi, int iterations = 200) {
  const Scalar inv_phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar a = lo, b = hi;
  Scalar c = b - inv_phi * (b - a);
  Scalar d = a + inv_phi * (b - a);
  Scalar fc = f(c), fd = f(d);
  for (int i = 0; i < iterations && b - a > std::numeric_limits<Scalar>::epsilon() *
                                                std::max(Scalar(1), std::abs(a)); ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // The bracket ends may beat the interior probes on cusp-shaped minima.
  Scalar best = fc <= fd ? c : d;
  Scalar fbest = std::min(fc, fd);
  for (Scalar x : {a, b}) {
    const Scalar fx = f(x);
    if (fx < fbest) {
      fbest = fx;
      best = x;
    }
  }
  return best;
}

/// A located minimum of a gap function over the (theta, J/G) plane.
template <typename Scalar>
struct GapMinimum {
  Scalar theta = 0;
  Scalar ratio = 0;
  Scalar gap = 0;
};

/// Grid scan for local minima of gap(theta, ratio), each refined by two
/// alternating golden-section passes (theta at fixed ratio, then ratio).
/// Minima closer than 1e-6 in both coordinates are merged.
template <typename Scalar, typename GapFn>
std::vector<GapMinimum<Scalar>> scan_gap_minima(GapFn&& gap, const SearchBox<Scalar>& box) {
  box.validate();
  const auto thetas = linspace(box.theta_min, box.theta_max, box.theta_points);
  const auto ratios = linspace(box.ratio_min, box.ratio_max, box.ratio_points);
  const std::size_t nt = thetas.size(), nr = ratios.size();
  std::vector<Scalar> values(nt * nr);
  for (std::size_t it = 0; it < nt; ++it)
    for (std::size_t ir = 0; ir < nr; ++ir) values[it * nr + ir] = gap(thetas[it], ratios[ir]);

  std::vector<GapMinimum<Scalar>> found;
  for (std::size_t it = 0; it < nt; ++it) {
    for (std::size_t ir = 0; ir < nr; ++ir) {
      const Scalar v = values[it * nr + ir];
      bool is_min = true;
      for (int dt = -1; dt <= 1 && is_min; ++dt) {
        for (int dr = -1; dr <= 1; ++dr) {
          if (dt == 0 && dr == 0) continue;
          const long jt = static_cast<long>(it) + dt, jr = static_cast<long>(ir) + dr;
          if (jt < 0 || jr < 0 || jt >= static_cast<long>(nt) || jr >= static_cast<long>(nr))
            continue;
          const Scalar w = values[static_cast<std::size_t>(jt) * nr + static_cast<std::size_t>(jr)];
          // strict against earlier neighbours so plateaus report once
          const bool earlier = dt < 0 || (dt == 0 && dr < 0);
          if (earlier ? !(v < w) : !(v <= w)) {
            is_min = false;
            break;
          }
        }
      }
      if (!is_min) continue;

      const Scalar t_lo = thetas[it > 0 ? it - 1 : it];
      const Scalar t_hi = thetas[it + 1 < nt ? it + 1 : it];
      const Scalar r_lo = ratios[ir > 0 ? ir - 1 : ir];
      const Scalar r_hi = ratios[ir + 1 < nr ? ir + 1 : ir];
      Scalar theta = thetas[it], ratio = ratios[ir];
      for (int pass = 0; pass < 2; ++pass) {
        theta = golden_section_minimize([&](Scalar t) { return gap(t, ratio); }, t_lo, t_hi);
        ratio = golden_section_minimize([&](Scalar r) { return gap(theta, r); }, r_lo, r_hi);
      }
      found.push_back({theta, ratio, gap(theta, ratio)});
    }
  }

  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.theta < b.theta; });
  std::vector<GapMinimum<Scalar>> merged;
  for (const auto& m : found) {
    auto dup = std::find_if(merged.begin(), merged.end(), [&](const auto& k) {
      return std::abs(k.theta - m.theta) < Scalar(1e-6) && std::abs(k.ratio - m.ratio) < Scalar(1e-6);
    });
    if (dup == merged.end()) {
      merged.push_back(m);
    } else if (m.gap < dup->gap) {
      *dup = m;
    }
  }
  return merged;
}

namespace detail {
template <typename Scalar>
EpRecord<Scalar> make_ep_record(const GapMinimum<Scalar>& m, int order, std::string source) {
  EpRecord<Scalar> ep;
  ep.theta_star = m.theta;
  ep.j_over_g = m.ratio;
  ep.n = std::llround((m.theta / half_pi<Scalar> + Scalar(1)) / Scalar(2));
  ep.parity = parity_of(ep.n);
  ep.eigengap = m.gap;
  ep.order = order;
  ep.source = std::move(source);
  return ep;
}
}  // namespace detail

/// Two-mode exceptional points inside the box: minima of |lambda_+ - lambda_-|
/// accepted when the gap is at most coalescence_tolerance * G.
template <typename Scalar>
std::vector<EpRecord<Scalar>> locate_eps(const EffectiveParams<Scalar>& model,
                                         const SearchBox<Scalar>& box) {
  model.validate();
  if (!(model.G > 0)) throw ValidationError("EP search needs G > 0");
  const auto gap = [&](Scalar theta, Scalar ratio) {
    return eigengap(model.retuned(ratio * model.G, theta));
  };
  std::vector<EpRecord<Scalar>> out;
  for (const auto& m : scan_gap_minima(gap, box)) {
    if (m.gap <= Scalar(coalescence_tolerance) * model.G)
      out.push_back(detail::make_ep_record(m, 2, "two_mode"));
  }
  return out;
}

/// Number of independent eigenvectors for eigenvalue lambda: N - rank(M - lambda I),
/// with rank decided relative to tolerance * ||M||.
template <typename Scalar>
Eigen::Index geometric_multiplicity(const MatrixX<Scalar>& m, Complex<Scalar> lambda,
                                    Scalar tolerance = Scalar(1e-8)) {
  MatrixX<Scalar> shifted = m - lambda * MatrixX<Scalar>::Identity(m.rows(), m.cols());
  Eigen::FullPivLU<MatrixX<Scalar>> lu(shifted);
  lu.setThreshold(tolerance * std::max(Scalar(1), m.norm()) /
                  std::max(Scalar(1), shifted.cwiseAbs().maxCoeff()));
  return m.rows() - lu.rank();
}

/// ||M M^dagger - M^dagger M||_F.
template <typename Scalar>
Scalar normality_residual(const MatrixX<Scalar>& m) {
  const MatrixX<Scalar> mh = m.adjoint();
  return (m * mh - mh * m).norm();
}

/// Largest pairwise distance within a spectrum.
template <typename Scalar>
Scalar spectral_spread(const Spectrum<Scalar>& s) {
  Scalar spread = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      spread = std::max(spread, std::abs(s.eigenvalues[i] - s.eigenvalues[j]));
  return spread;
}

template <typename Scalar>
struct RingEpReport {
  /// Triple coalescences of the ring matrix itself that are also defective.
  std::vector<EpRecord<Scalar>> numeric;
  /// Triple coalescences of the published closed forms.
  std::vector<EpRecord<Scalar>> as_published;
  /// Smallest circulant spread seen anywhere in the box (after refinement).
  Scalar min_numeric_spread = 0;
};

/// Third-order EP search on the ring over (theta, J/G); kappa and G come from
/// the template.
template <typename Scalar>
RingEpReport<Scalar> locate_ring_eps(const RingParams<Scalar>& model,
                                     const SearchBox<Scalar>& box) {
  model.validate();
  if (!(model.G > 0)) throw ValidationError("EP search needs G > 0");
  const auto at = [&](Scalar theta, Scalar ratio) {
    RingParams<Scalar> p = model;
    p.theta = theta;
    p.J = ratio * model.G;
    return p;
  };
  const Scalar tol = Scalar(coalescence_tolerance) * model.G;
  RingEpReport<Scalar> report;

  const auto numeric_gap = [&](Scalar t, Scalar r) {
    return spectral_spread(ring_eig_circulant(at(t, r)));
  };
  report.min_numeric_spread = std::numeric_limits<Scalar>::infinity();
  for (const auto& m : scan_gap_minima(numeric_gap, box)) {
    report.min_numeric_spread = std::min(report.min_numeric_spread, m.gap);
    if (m.gap > tol) continue;
    const auto p = at(m.theta, m.ratio);
    const auto cm = build_ring_matrix(p);
    const auto s = ring_eig_circulant(p);
    if (geometric_multiplicity(cm.m, s.eigenvalues[0]) < 3)
      report.numeric.push_back(detail::make_ep_record(m, 3, "ring_numeric"));
  }

  const auto paper_gap = [&](Scalar t, Scalar r) {
    return spectral_spread(ring_eig_paper(at(t, r)));
  };
  for (const auto& m : scan_gap_minima(paper_gap, box)) {
    if (m.gap <= tol) report.as_published.push_back(detail::make_ep_record(m, 3, "ring_as_published"));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ring discrepancy and adiabatic checks

template <typename Scalar>
struct RingDiscrepancy {
  Spectrum<Scalar> as_published;
  Spectrum<Scalar> circulant;  // reordered to pair with as_published
  std::vector<Scalar> branch_gap;
  /// max_k |det(M - lambda'_k I)| over the published eigenvalues.
  Scalar char_poly_residual = 0;
  Scalar normality = 0;
};

template <typename Scalar>
RingDiscrepancy<Scalar> ring_discrepancy(const RingParams<Scalar>& p) {
  RingDiscrepancy<Scalar> out;
  out.as_published = ring_eig_paper(p);
  const auto circ = ring_eig_circulant(p);
  const auto perm = match_branches(out.as_published.eigenvalues, circ.eigenvalues);
  out.circulant.source = circ.source;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.circulant.eigenvalues.push_back(circ.eigenvalues[perm[k]]);
    out.circulant.branch_ids.push_back(static_cast<int>(k));
    out.branch_gap.push_back(std::abs(out.as_published.eigenvalues[k] - circ.eigenvalues[perm[k]]));
  }
  const auto cm = build_ring_matrix(p);
  for (const auto& lambda : out.as_published.eigenvalues) {
    const MatrixX<Scalar> shifted = cm.m - lambda * MatrixX<Scalar>::Identity(3, 3);
    out.char_poly_residual = std::max(out.char_poly_residual, std::abs(shifted.determinant()));
  }
  out.normality = normality_residual(cm.m);
  return out;
}

/// The two cavity-like eigenvalues of a three-mode spectrum: the mechanical
/// branch is the most strongly damped one.
template <typename Scalar>
std::vector<Complex<Scalar>> cavity_branches(const Spectrum<Scalar>& full) {
  std::vector<Complex<Scalar>> ev = full.eigenvalues;
  auto mech = std::min_element(ev.begin(), ev.end(),
                               [](const auto& a, const auto& b) { return a.imag() < b.imag(); });
  ev.erase(mech);
  return ev;
}

/// Max distance between the full model's cavity branches at the given
/// mechanical damping and the two-mode closed form, after optimal pairing.
template <typename Scalar>
Scalar adiabatic_error(const EffectiveParams<Scalar>& e, Scalar gamma) {
  const auto full = lift(e, gamma);
  const auto cavity = cavity_branches(eig_numeric(build_full_matrix(full, full_port_rate(e))));
  const auto closed = eig2_closed(e).eigenvalues;
  const auto perm = match_branches(closed, cavity);
  Scalar err = 0;
  for (std::size_t k = 0; k < closed.size(); ++k)
    err = std::max(err, std::abs(closed[k] - cavity[perm[k]]));
  return err;
}

}  // namespace rdom
