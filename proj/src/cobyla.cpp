#include "ulca/cobyla.hpp"

#include <cmath>
#include <limits>

#include "ulca/error.hpp"

namespace ulca {
namespace {

// Powell's simplex acceptability and step constants.
constexpr double kAlpha = 0.25;  // min distance of a vertex from its opposite face, in rho
constexpr double kBeta = 2.1;    // max edge length from the base vertex, in rho
constexpr double kGamma = 0.5;   // geometry-step length, in rho
constexpr double kDelta = 1.1;   // edge length that makes a vertex a drop candidate, in rho

struct SimplexModel {
  Eigen::MatrixXd offsets;  // column j: vertex j+1 minus base vertex
  Eigen::MatrixXd inverse;  // rows are normals of the faces opposite each vertex
  Eigen::VectorXd gradient;
  Eigen::VectorXd vsig;     // distance of each vertex from its opposite face
  Eigen::VectorXd veta;     // distance of each vertex from the base
  bool invertible = false;

  bool acceptable(double rho) const {
    return vsig.minCoeff() >= kAlpha * rho && veta.maxCoeff() <= kBeta * rho;
  }
};

class BoxCobyla {
 public:
  BoxCobyla(const Objective& f, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
            const CobylaConfig& cfg, const std::atomic<bool>* cancel, const ProgressFn& progress)
      : f_(f), lower_(lower), upper_(upper), cfg_(cfg), cancel_(cancel), progress_(progress) {}

  CobylaResult run(const Eigen::VectorXd& start) {
    const auto n = start.size();
    result_.f = std::numeric_limits<double>::infinity();
    if (!evaluate(start)) return finish();
    result_.f_init = result_.f;
    if (n == 0) return finish();

    vertices_.resize(n, n + 1);
    values_.resize(n + 1);
    double rho = cfg_.rho_begin;
    if (!build_simplex(start, last_value_, rho)) return finish();

    bool geometry_pending = false;
    while (result_.evaluations < cfg_.max_evals && !cancelled()) {
      move_best_to_base();
      SimplexModel model = analyze();
      if (!model.invertible) {
        if (!build_simplex(vertices_.col(0), values_(0), rho)) break;
        continue;
      }
      if (geometry_pending) {
        geometry_pending = false;
        if (!model.acceptable(rho)) {
          if (!geometry_step(model, rho)) break;
          continue;
        }
      }

      const Eigen::VectorXd base = vertices_.col(0);
      const double f_base = values_(0);
      const Eigen::VectorXd step = trust_region_step(model.gradient, base, rho);
      bool reduce = step.norm() < 0.5 * rho;
      if (!reduce) {
        const Eigen::VectorXd trial = clip(base + step);
        if (!evaluate(trial)) break;
        const double f_trial = last_value_;
        const double predicted = -model.gradient.dot(step);
        const double actual = f_base - f_trial;
        replace_vertex(model, trial, f_trial, step, actual > 0.0, rho);
        reduce = !(actual > 0.0 && actual >= 0.1 * predicted);
      }
      if (!reduce) continue;

      const SimplexModel current = analyze();
      if (current.invertible && !current.acceptable(rho)) {
        geometry_pending = true;
        continue;
      }
      if (rho <= cfg_.rho_end) break;
      rho *= 0.5;
      if (rho <= 1.5 * cfg_.rho_end) rho = cfg_.rho_end;
    }
    return finish();
  }

 private:
  bool cancelled() const { return cancel_ && cancel_->load(std::memory_order_relaxed); }

  Eigen::VectorXd clip(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower_).cwiseMin(upper_);
  }

  // Evaluates f at x (which must be feasible); false when the budget or a
  // cancellation stops the run.
  bool evaluate(const Eigen::VectorXd& x) {
    if (result_.evaluations >= cfg_.max_evals) return false;
    if (cancelled()) {
      result_.cancelled = true;
      return false;
    }
    double value = f_(x);
    if (!std::isfinite(value)) value = std::numeric_limits<double>::infinity();
    ++result_.evaluations;
    last_value_ = value;
    if (result_.evaluations == 1 || value < result_.f) {
      result_.f = value;
      result_.x = x;
    }
    result_.trace.push_back({result_.x, result_.f});
    if (progress_) progress_(result_.evaluations, result_.f);
    return true;
  }

  // Base vertex plus one step of length rho along each coordinate, pointing
  // into the box.
  bool build_simplex(const Eigen::VectorXd& base, double f_base, double rho) {
    const auto n = base.size();
    vertices_.col(0) = base;
    values_(0) = f_base;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double room_up = upper_(i) - base(i);
      const double room_down = base(i) - lower_(i);
      double step = rho;
      if (room_up < rho) step = room_down >= rho ? -rho : (room_up >= room_down ? room_up : -room_down);
      Eigen::VectorXd x = base;
      x(i) += step;
      x = clip(x);  // base + (upper - base) can round past upper
      if (!evaluate(x)) return false;
      vertices_.col(i + 1) = x;
      values_(i + 1) = last_value_;
    }
    return true;
  }

  void move_best_to_base() {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < values_.size(); ++j) {
      if (values_(j) < values_(best)) best = j;
    }
    if (best != 0) {
      vertices_.col(0).swap(vertices_.col(best));
      std::swap(values_(0), values_(best));
    }
  }

  SimplexModel analyze() const {
    const auto n = vertices_.rows();
    SimplexModel m;
    m.offsets = vertices_.rightCols(n).colwise() - vertices_.col(0);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m.offsets);
    m.invertible = lu.isInvertible() && lu.rcond() > 1e-14;
    if (!m.invertible) return m;
    m.inverse = lu.inverse();
    const Eigen::VectorXd df = values_.tail(n).array() - values_(0);
    m.gradient = m.inverse.transpose() * df;
    m.vsig = m.inverse.rowwise().norm().cwiseInverse();
    m.veta = m.offsets.colwise().norm().transpose();
    return m;
  }

  // Minimizes g.d over the ball |d| <= rho intersected with the box. The
  // minimizer has the form d(t) = clip(-t g) for the t where |d(t)| = rho.
  Eigen::VectorXd trust_region_step(const Eigen::VectorXd& g, const Eigen::VectorXd& base,
                                    double rho) const {
    const Eigen::VectorXd lo = lower_ - base;
    const Eigen::VectorXd hi = upper_ - base;
    auto step_at = [&](double t) { return Eigen::VectorXd((-t * g).cwiseMax(lo).cwiseMin(hi)); };
    double t_max = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (g(i) > 0.0) t_max = std::max(t_max, -lo(i) / g(i));
      if (g(i) < 0.0) t_max = std::max(t_max, hi(i) / -g(i));
    }
    if (t_max == 0.0) return Eigen::VectorXd::Zero(g.size());
    if (step_at(t_max).norm() <= rho) return step_at(t_max);
    double t_lo = 0.0;
    double t_hi = t_max;
    for (int it = 0; it < 200 && t_hi - t_lo > 1e-15 * t_hi; ++it) {
      const double mid = 0.5 * (t_lo + t_hi);
      (step_at(mid).norm() > rho ? t_hi : t_lo) = mid;
    }
    return step_at(t_lo);
  }

  // Powell's rule for which vertex the trial point replaces: the one whose
  // opposite face the step leaves furthest, preferring far-away vertices. On
  // a failed step a vertex is only replaced if that enlarges the simplex.
  void replace_vertex(const SimplexModel& model, const Eigen::VectorXd& trial, double f_trial,
                      const Eigen::VectorXd& step, bool improved, double rho) {
    const auto n = step.size();
    Eigen::Index drop = -1;
    double best = improved ? 0.0 : 1.0;
    Eigen::VectorXd sigbar(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double t = std::abs(model.inverse.row(j).dot(step));
      if (t > best) {
        drop = j;
        best = t;
      }
      sigbar(j) = t * model.vsig(j);
    }
    double edge_max = kDelta * rho;
    Eigen::Index far = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (sigbar(j) >= kAlpha * rho || sigbar(j) >= model.vsig(j)) {
        const double edge = improved ? (step - model.offsets.col(j)).norm() : model.veta(j);
        if (edge > edge_max) {
          far = j;
          edge_max = edge;
        }
      }
    }
    if (far >= 0) drop = far;
    if (drop < 0) return;
    vertices_.col(drop + 1) = trial;
    values_(drop + 1) = f_trial;
  }

  // Moves the worst-placed vertex perpendicular to its opposite face.
  bool geometry_step(const SimplexModel& model, double rho) {
    Eigen::Index l = 0;
    if (model.veta.maxCoeff(&l) <= kBeta * rho) model.vsig.minCoeff(&l);
    const Eigen::VectorXd base = vertices_.col(0);
    const double length = kGamma * rho;
    const Eigen::VectorXd normal = model.inverse.row(l).transpose().normalized();
    Eigen::VectorXd d = length * normal;
    if (model.gradient.dot(d) > 0.0) d = -d;

    auto feasible = [&](const Eigen::VectorXd& x) {
      return (x.array() >= lower_.array()).all() && (x.array() <= upper_.array()).all();
    };
    Eigen::VectorXd x = base + d;
    if (!feasible(x)) x = base - d;
    if (!feasible(x)) {
      Eigen::Index i = 0;
      normal.cwiseAbs().maxCoeff(&i);
      const double room_up = upper_(i) - base(i);
      const double room_down = base(i) - lower_(i);
      x = base;
      if (room_up >= length || room_up >= room_down) {
        x(i) += std::min(length, room_up);
      } else {
        x(i) -= std::min(length, room_down);
      }
      x = clip(x);
    }
    if (!evaluate(x)) return false;
    vertices_.col(l + 1) = x;
    values_(l + 1) = last_value_;
    return true;
  }

  CobylaResult finish() { return std::move(result_); }

  const Objective& f_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  CobylaConfig cfg_;
  const std::atomic<bool>* cancel_;
  const ProgressFn& progress_;

  Eigen::MatrixXd vertices_;
  Eigen::VectorXd values_;
  double last_value_ = 0.0;
  CobylaResult result_;
};

}  // namespace

CobylaResult cobyla_minimize(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const CobylaConfig& cfg,
                             const std::atomic<bool>* cancel, const ProgressFn& progress) {
  if (x0.size() != lower.size() || x0.size() != upper.size()) {
    throw Error(Errc::DimensionMismatch, "bounds and start point differ in length");
  }
  if (!((upper - lower).array() > 0.0).all()) {
    throw Error(Errc::InvalidArgument, "every upper bound must exceed its lower bound");
  }
  if (!(cfg.rho_begin > 0.0) || !(cfg.rho_end > 0.0) || cfg.rho_end > cfg.rho_begin) {
    throw Error(Errc::InvalidArgument, "need 0 < rho_end <= rho_begin");
  }
  if (cfg.max_evals < 1) throw Error(Errc::InvalidArgument, "max_evals must be at least 1");
  x0 = x0.cwiseMax(lower).cwiseMin(upper);
  BoxCobyla solver(f, lower, upper, cfg, cancel, progress);
  return solver.run(x0);
}

}  // namespace ulca
