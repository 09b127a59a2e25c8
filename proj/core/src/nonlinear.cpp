#include "dpc/nonlinear.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dpc/rng.hpp"

namespace dpc {

NonlinearSystem logistic_map(double r) {
  NonlinearSystem sys;
  sys.n = 1;
  sys.m = 1;
  sys.q = 1;
  sys.f = [r](const Vector& x, const Vector& u) {
    Vector out(1);
    out(0) = r * x(0) * (1.0 - x(0)) + u(0);
    return out;
  };
  sys.h = [](const Vector& x, const Vector&) { return x; };
  sys.jac_f = [r](const Vector& x, const Vector&) {
    Matrix fx(1, 1), fu(1, 1);
    fx(0, 0) = r * (1.0 - 2.0 * x(0));
    fu(0, 0) = 1.0;
    return std::make_pair(fx, fu);
  };
  sys.jac_h = [](const Vector&, const Vector&) {
    return std::make_pair(Matrix::Identity(1, 1).eval(), Matrix::Zero(1, 1).eval());
  };
  return sys;
}

NonlinearSystem from_linear(const StateSpace& lin) {
  NonlinearSystem sys;
  sys.n = lin.n();
  sys.m = lin.m();
  sys.q = lin.q();
  const Matrix A = lin.A, B = lin.B, C = lin.C, D = lin.D;
  sys.f = [A, B](const Vector& x, const Vector& u) { return Vector(A * x + B * u); };
  sys.h = [C, D](const Vector& x, const Vector& u) { return Vector(C * x + D * u); };
  sys.jac_f = [A, B](const Vector&, const Vector&) { return std::make_pair(A, B); };
  sys.jac_h = [C, D](const Vector&, const Vector&) { return std::make_pair(C, D); };
  return sys;
}

Vector stack_nonlinear_output(const NonlinearSystem& sys, const Vector& x0,
                              const std::vector<Vector>& inputs) {
  if (x0.size() != sys.n)
    throw_validation("stack_nonlinear_output: x0 has wrong dimension");
  Vector H(static_cast<Eigen::Index>(inputs.size()) * sys.q);
  Vector x = x0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].size() != sys.m)
      throw_validation("stack_nonlinear_output: input at step " + std::to_string(k) +
                       " has wrong dimension");
    Vector y;
    try {
      y = sys.h(x, inputs[k]);
      if (!y.allFinite()) throw std::runtime_error("non-finite output");
      x = sys.f(x, inputs[k]);
      if (!x.allFinite()) throw std::runtime_error("non-finite state");
    } catch (const std::exception& e) {
      throw_numerical("stack_nonlinear_output: evaluation failed at step " +
                      std::to_string(k) + ": " + e.what());
    }
    H.segment(static_cast<Eigen::Index>(k) * sys.q, sys.q) = y;
  }
  return H;
}

namespace detail {

namespace {

// Primitive polynomials over GF(2), found by exhaustive check (degree <= 10
// covers 75+ dimensions; the search runs once).
std::vector<std::uint32_t> primitive_polynomials(int count) {
  std::vector<std::uint32_t> polys;
  auto poly_degree = [](std::uint32_t p) {
    int d = -1;
    while (p) { ++d; p >>= 1; }
    return d;
  };
  // multiplication of x^k modulo poly
  auto is_primitive = [&](std::uint32_t poly) {
    const int deg = poly_degree(poly);
    const std::uint32_t order = (1u << deg) - 1;
    // primitive iff x has multiplicative order 2^deg - 1
    std::uint32_t x = 2;  // polynomial "x"
    std::uint32_t acc = x;
    std::uint32_t steps = 1;
    auto mulx = [&](std::uint32_t v) {
      v <<= 1;
      if (v & (1u << deg)) v ^= poly;
      return v;
    };
    while (acc != 1 && steps <= order) {
      acc = mulx(acc);
      ++steps;
    }
    return acc == 1 && steps == order;
  };
  for (int deg = 1; static_cast<int>(polys.size()) < count && deg <= 16; ++deg) {
    for (std::uint32_t tail = 0; tail < (1u << deg); ++tail) {
      const std::uint32_t poly = (1u << deg) | tail;
      if (!(poly & 1u)) continue;  // constant term required
      if (is_primitive(poly)) {
        polys.push_back(poly);
        if (static_cast<int>(polys.size()) == count) break;
      }
    }
  }
  return polys;
}

}  // namespace

SobolSequence::SobolSequence(int dim) : dim_(dim) {
  if (dim < 1 || dim > 128)
    throw_validation("SobolSequence: dimension must be in [1,128]");
  dirs_.resize(dim_);
  state_.assign(dim_, 0);
  // dimension 0: van der Corput (direction numbers 2^{-k})
  for (int k = 0; k < 64; ++k) dirs_[0][k] = 1ULL << (63 - k);
  if (dim_ == 1) return;
  const auto polys = primitive_polynomials(dim_ - 1);
  Rng init_stream(0x5eb01d1cULL);
  for (int d = 1; d < dim_; ++d) {
    const std::uint32_t poly = polys[d - 1];
    int s = 0;
    { std::uint32_t p = poly >> 1; while (p) { ++s; p >>= 1; } }
    std::array<std::uint64_t, 64> m{};
    for (int k = 0; k < s; ++k) {
      // odd initial direction integer below 2^{k+1}, fixed deterministic draw
      const std::uint64_t r = init_stream.next_u64();
      m[k] = (r % (1ULL << k)) * 2 + 1;
    }
    for (int k = s; k < 64; ++k) {
      std::uint64_t v = m[k - s] ^ (m[k - s] << s);
      for (int j = 1; j < s; ++j)
        if ((poly >> (s - j)) & 1u) v ^= m[k - j] << j;
      m[k] = v;
    }
    for (int k = 0; k < 64; ++k) dirs_[d][k] = m[k] << (63 - k);
  }
}

Vector SobolSequence::next() {
  Vector out(dim_);
  if (index_ == 0) {
    for (int d = 0; d < dim_; ++d) out(d) = 0.0;
    ++index_;
    return out;
  }
  // Gray-code increment: flip the direction of the lowest zero bit of index-1
  std::uint64_t v = index_ - 1;
  int bit = 0;
  while (v & 1) { v >>= 1; ++bit; }
  for (int d = 0; d < dim_; ++d) {
    state_[d] ^= dirs_[d][bit];
    out(d) = static_cast<double>(state_[d] >> 11) * 0x1.0p-53;
  }
  ++index_;
  return out;
}

Vector nelder_mead_max(const std::function<double(const Vector&)>& fn, const Vector& start,
                       double initial_step, int max_iters) {
  const Eigen::Index d = start.size();
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  std::vector<Vector> pts;
  std::vector<double> vals;
  pts.push_back(start);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector p = start;
    p(i) += initial_step;
    pts.push_back(p);
  }
  for (const auto& p : pts) vals.push_back(fn(p));

  auto order = [&]() {
    std::vector<std::size_t> idx(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return vals[a] > vals[b];  // descending: best first
    });
    std::vector<Vector> np(pts.size());
    std::vector<double> nv(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      np[i] = pts[idx[i]];
      nv[i] = vals[idx[i]];
    }
    pts.swap(np);
    vals.swap(nv);
  };

  for (int it = 0; it < max_iters; ++it) {
    order();
    if (std::abs(vals.front() - vals.back()) <
        1e-13 * std::max(1.0, std::abs(vals.front())))
      break;
    Vector centroid = Vector::Zero(d);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
    centroid /= static_cast<double>(pts.size() - 1);
    const Vector& worst = pts.back();
    const Vector refl = centroid + alpha * (centroid - worst);
    const double frefl = fn(refl);
    if (frefl > vals.front()) {
      const Vector exp_pt = centroid + gamma * (refl - centroid);
      const double fexp = fn(exp_pt);
      if (fexp > frefl) { pts.back() = exp_pt; vals.back() = fexp; }
      else { pts.back() = refl; vals.back() = frefl; }
    } else if (frefl > vals[vals.size() - 2]) {
      pts.back() = refl;
      vals.back() = frefl;
    } else {
      const Vector contr = centroid + rho * (worst - centroid);
      const double fcontr = fn(contr);
      if (fcontr > vals.back()) { pts.back() = contr; vals.back() = fcontr; }
      else {
        for (std::size_t i = 1; i < pts.size(); ++i) {
          pts[i] = pts.front() + shrink * (pts[i] - pts.front());
          vals[i] = fn(pts[i]);
        }
      }
    }
  }
  order();
  return pts.front();
}

}  // namespace detail

NonlinearCalibration calibrate_nonlinear_gaussian(const NonlinearSystem& sys,
                                                  const Vector& x0,
                                                  const std::vector<Vector>& inputs,
                                                  const PrivacyBudget& budget,
                                                  const SensitivitySearchConfig& cfg) {
  budget.validate_gaussian();
  const Eigen::Index d = sys.n + static_cast<Eigen::Index>(inputs.size()) * sys.m;
  const Vector H0 = stack_nonlinear_output(sys, x0, inputs);
  const double c = budget.c;

  auto perturbed = [&](const Vector& v) {
    const Vector dx = v.head(sys.n);
    std::vector<Vector> u = inputs;
    for (std::size_t k = 0; k < u.size(); ++k)
      u[k] += v.segment(sys.n + static_cast<Eigen::Index>(k) * sys.m, sys.m);
    return stack_nonlinear_output(sys, x0 + dx, u);
  };
  auto objective = [&](const Vector& v_raw) {
    Vector v = v_raw;
    const double nrm = v.norm();
    if (nrm > c) v *= c / nrm;  // project onto the adjacency ball
    return (perturbed(v) - H0).norm();
  };

  detail::SobolSequence seq(static_cast<int>(d));
  std::vector<std::pair<double, Vector>> best;
  for (int i = 0; i < cfg.sobol_points; ++i) {
    const Vector u01 = seq.next();
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v(j) = 2.0 * u01(j) - 1.0;
    const double nrm = v.norm();
    if (nrm > 1.0) v /= nrm;
    v *= c;
    const double val = objective(v);
    best.emplace_back(val, v);
  }
  std::sort(best.begin(), best.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  double sup = best.empty() ? 0.0 : best.front().first;
  Vector argmax = best.empty() ? Vector::Zero(d) : best.front().second;
  const int starts = std::min<int>(cfg.ascent_starts, static_cast<int>(best.size()));
  for (int s = 0; s < starts; ++s) {
    const Vector top = detail::nelder_mead_max(objective, best[s].second, 0.05 * c,
                                               cfg.nelder_mead_iters);
    const double val = objective(top);
    if (val > sup) {
      sup = val;
      argmax = top;
      const double nrm = argmax.norm();
      if (nrm > c) argmax *= c / nrm;
    }
  }

  NonlinearCalibration cal;
  cal.sup_deviation = sup;
  cal.sigma_floor = sup * r_value(budget.epsilon, budget.delta);
  cal.lambda_min_floor = cal.sigma_floor * cal.sigma_floor;
  cal.worst_direction = argmax;
  return cal;
}

Matrix stacked_output_jacobian(const NonlinearSystem& sys, const Vector& x0,
                               const std::vector<Vector>& inputs) {
  const Eigen::Index steps = static_cast<Eigen::Index>(inputs.size());
  const Eigen::Index cols = sys.n + steps * sys.m;

  auto jac_f = [&](const Vector& x, const Vector& u) {
    if (sys.jac_f) return sys.jac_f(x, u);
    Matrix fx(sys.n, sys.n), fu(sys.n, sys.m);
    for (Eigen::Index i = 0; i < sys.n; ++i) {
      const double step = 1e-6 * (1.0 + std::abs(x(i)));
      Vector xp = x, xm = x;
      xp(i) += step;
      xm(i) -= step;
      fx.col(i) = (sys.f(xp, u) - sys.f(xm, u)) / (2 * step);
    }
    for (Eigen::Index i = 0; i < sys.m; ++i) {
      const double step = 1e-6 * (1.0 + std::abs(u(i)));
      Vector up = u, um = u;
      up(i) += step;
      um(i) -= step;
      fu.col(i) = (sys.f(x, up) - sys.f(x, um)) / (2 * step);
    }
    return std::make_pair(fx, fu);
  };
  auto jac_h = [&](const Vector& x, const Vector& u) {
    if (sys.jac_h) return sys.jac_h(x, u);
    Matrix hx(sys.q, sys.n), hu(sys.q, sys.m);
    for (Eigen::Index i = 0; i < sys.n; ++i) {
      const double step = 1e-6 * (1.0 + std::abs(x(i)));
      Vector xp = x, xm = x;
      xp(i) += step;
      xm(i) -= step;
      hx.col(i) = (sys.h(xp, u) - sys.h(xm, u)) / (2 * step);
    }
    for (Eigen::Index i = 0; i < sys.m; ++i) {
      const double step = 1e-6 * (1.0 + std::abs(u(i)));
      Vector up = u, um = u;
      up(i) += step;
      um(i) -= step;
      hu.col(i) = (sys.h(x, up) - sys.h(x, um)) / (2 * step);
    }
    return std::make_pair(hx, hu);
  };

  Matrix J = Matrix::Zero(steps * sys.q, cols);
  // S = dx(k)/d(x0, U); grows one input block per step
  Matrix S = Matrix::Zero(sys.n, cols);
  S.leftCols(sys.n) = Matrix::Identity(sys.n, sys.n);
  Vector x = x0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const auto [hx, hu] = jac_h(x, inputs[k]);
    J.middleRows(k * sys.q, sys.q) = hx * S;
    J.block(k * sys.q, sys.n + k * sys.m, sys.q, sys.m) += hu;
    const auto [fx, fu] = jac_f(x, inputs[k]);
    S = fx * S;
    S.block(0, sys.n + k * sys.m, sys.n, sys.m) += fu;
    x = sys.f(x, inputs[k]);
  }
  return J;
}

double nonlinear_laplace_scale(const NonlinearSystem& sys, const Vector& x0,
                               const std::vector<Vector>& inputs,
                               const PrivacyBudget& budget, const DomainBox& box,
                               int samples) {
  budget.validate_laplace();
  if (box.x_lo.size() != sys.n || box.x_hi.size() != sys.n)
    throw_validation("nonlinear_laplace_scale: state box has wrong dimension");
  if (box.u_lo.size() != sys.m || box.u_hi.size() != sys.m)
    throw_validation("nonlinear_laplace_scale: input box has wrong dimension");
  const Eigen::Index steps = static_cast<Eigen::Index>(inputs.size());
  const Eigen::Index d = sys.n + steps * sys.m;

  double sup = 0.0;
  auto consider = [&](const Vector& x, const std::vector<Vector>& u) {
    const Matrix J = stacked_output_jacobian(sys, x, u);
    const double norm1 = J.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(norm1) || norm1 > 1e12)
      throw_numerical("nonlinear_laplace_scale: unbounded sensitivity on box");
    sup = std::max(sup, norm1);
  };
  auto point_at = [&](const std::function<double(Eigen::Index)>& coord) {
    Vector x(sys.n);
    for (Eigen::Index i = 0; i < sys.n; ++i)
      x(i) = box.x_lo(i) + coord(i) * (box.x_hi(i) - box.x_lo(i));
    std::vector<Vector> u(steps, Vector(sys.m));
    for (Eigen::Index k = 0; k < steps; ++k)
      for (Eigen::Index i = 0; i < sys.m; ++i) {
        const Eigen::Index idx = sys.n + k * sys.m + i;
        u[k](i) = box.u_lo(i) + coord(idx) * (box.u_hi(i) - box.u_lo(i));
      }
    consider(x, u);
  };

  detail::SobolSequence seq(static_cast<int>(d));
  for (int s = 0; s < samples; ++s) {
    const Vector u01 = seq.next();
    point_at([&](Eigen::Index i) { return u01(i); });
  }
  // box corners carry the extrema of polynomial-type sensitivities
  if (d <= 12) {
    for (std::uint64_t mask = 0; mask < (1ULL << d); ++mask)
      point_at([&](Eigen::Index i) { return (mask >> i) & 1 ? 1.0 : 0.0; });
  }
  consider(x0, inputs);
  return budget.c * sup / budget.epsilon;
}

namespace {

void validate_class_k(const KFunction& fn, double c, const std::string& what) {
  if (std::abs(fn.value(0.0)) > 1e-12)
    throw_validation(what + ": class-K function must vanish at 0");
  double prev = 0.0;
  for (int i = 1; i <= 32; ++i) {
    const double r = c * i / 32.0;
    const double v = fn.value(r);
    if (v < prev - 1e-12)
      throw_validation(what + ": supplied gain function is not increasing on [0,c]");
    prev = v;
  }
}

}  // namespace

IosCheckReport check_incremental_ios(const NonlinearSystem& sys, const IosCertificate& cert,
                                     const IosSampleSpec& spec) {
  if (!(cert.lambda > 0.0 && cert.lambda < 1.0))
    throw_validation("check_incremental_ios: lambda must lie in (0,1)");
  if (!(cert.c1 > 0.0)) throw_validation("check_incremental_ios: c1 must be positive");

  auto pnorm = [&](const Vector& v) {
    if (cert.p == 2) return v.norm();
    if (cert.p == 1) return v.template lpNorm<1>();
    return v.template lpNorm<Eigen::Infinity>();
  };

  const Eigen::Index d = 2 * sys.n + 2 * sys.m;
  IosCheckReport rep;
  rep.worst_margin_output = std::numeric_limits<double>::infinity();
  rep.worst_margin_bound = std::numeric_limits<double>::infinity();
  rep.worst_margin_contraction = std::numeric_limits<double>::infinity();

  std::vector<Vector> sample_points;
  if (spec.tensor_grid) {
    if (d > 8)
      throw_validation("check_incremental_ios: tensor grid limited to 2n+2m <= 8");
    const int per_axis = std::max(
        2, static_cast<int>(std::ceil(std::pow(double(spec.samples), 1.0 / d))));
    std::vector<int> idx(d, 0);
    while (true) {
      Vector p(d);
      for (Eigen::Index i = 0; i < d; ++i)
        p(i) = static_cast<double>(idx[i]) / (per_axis - 1);
      sample_points.push_back(p);
      Eigen::Index pos = 0;
      while (pos < d && ++idx[pos] == per_axis) idx[pos++] = 0;
      if (pos == d) break;
    }
  } else {
    detail::SobolSequence seq(static_cast<int>(d));
    for (int s = 0; s < spec.samples; ++s) sample_points.push_back(seq.next());
  }

  auto map_box = [](double t, double lo, double hi) { return lo + t * (hi - lo); };
  for (const Vector& u01 : sample_points) {
    Vector x(sys.n), xp(sys.n), u(sys.m), up(sys.m);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < sys.n; ++i, ++k)
      x(i) = map_box(u01(k), spec.x_lo(i), spec.x_hi(i));
    for (Eigen::Index i = 0; i < sys.n; ++i, ++k)
      xp(i) = map_box(u01(k), spec.x_lo(i), spec.x_hi(i));
    for (Eigen::Index i = 0; i < sys.m; ++i, ++k)
      u(i) = map_box(u01(k), spec.u_lo(i), spec.u_hi(i));
    for (Eigen::Index i = 0; i < sys.m; ++i, ++k)
      up(i) = map_box(u01(k), spec.u_lo(i), spec.u_hi(i));

    const double V = cert.V(x, xp);
    const double du = pnorm(u - up);
    const double m1 = V + cert.sigma1.value(du) - cert.c1 * pnorm(sys.h(x, u) - sys.h(xp, up));
    const double m2 = cert.alpha2.value(pnorm(x - xp)) - V;
    const double m3 =
        cert.lambda * V + cert.sigma2.value(du) - cert.V(sys.f(x, u), sys.f(xp, up));

    // equality-tight certificates land on zero up to roundoff
    const double fp_tol = 1e-12 * (1.0 + std::abs(V) + du);
    auto consider = [&](double margin, int cond) {
      double& worst = cond == 1   ? rep.worst_margin_output
                      : cond == 2 ? rep.worst_margin_bound
                                  : rep.worst_margin_contraction;
      if (margin < worst) worst = margin;
      if (margin < -fp_tol && (!rep.witness || margin < rep.witness->margin))
        rep.witness = IosWitness{x, xp, u, up, margin, cond};
    };
    consider(m1, 1);
    consider(m2, 2);
    consider(m3, 3);
  }
  rep.holds_on_samples = !rep.witness.has_value();
  return rep;
}

double calibrate_ios_gaussian(const KFunction& alpha, const KFunction& gamma,
                              const PrivacyBudget& budget, int t) {
  budget.validate_gaussian();
  validate_class_k(alpha, budget.c, "calibrate_ios_gaussian alpha");
  validate_class_k(gamma, budget.c, "calibrate_ios_gaussian gamma");
  const double root = (alpha.value(budget.c) + (t + 1) * gamma.value(budget.c)) *
                      r_value(budget.epsilon, budget.delta);
  return root * root;
}

}  // namespace dpc
