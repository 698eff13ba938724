#include "fliplog/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "fliplog/errors.hpp"
#include "fliplog/ops.hpp"

namespace fliplog {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "mse";
    case LossKind::Mae: return "mae";
    case LossKind::Msle: return "msle";
    case LossKind::Lmse: return "lmse";
    case LossKind::Fl: return "fl";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "mae") return LossKind::Mae;
  if (name == "msle") return LossKind::Msle;
  if (name == "lmse") return LossKind::Lmse;
  if (name == "fl") return LossKind::Fl;
  throw ContractError("unknown loss kind '" + name + "'");
}

std::string LossSpec::name() const {
  if (kind == LossKind::Fl) return "fl(" + to_string(fl_inner) + ")";
  return to_string(kind);
}

namespace {

void check_shapes(const char* op, const Tensor& y, const Tensor& yhat) {
  if (y.shape() != yhat.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(y.shape()) + " vs " + shape_str(yhat.shape()));
  }
}

}  // namespace

Tensor mse(const Tensor& y, const Tensor& yhat) {
  check_shapes("mse", y, yhat);
  Tensor d = sub(y, yhat);
  return mean(mul(d, d));
}

Tensor mae(const Tensor& y, const Tensor& yhat) {
  check_shapes("mae", y, yhat);
  return mean(abs(sub(y, yhat)));
}

Tensor msle(const Tensor& y, const Tensor& yhat) {
  check_shapes("msle", y, yhat);
  Tensor d = sub(log1p(y), log1p(yhat));  // log1p enforces the > -1 domain
  return mean(mul(d, d));
}

Tensor lmse(const Tensor& y, const Tensor& yhat, double epsilon) {
  check_shapes("lmse", y, yhat);
  auto yv = y.data();
  auto pv = yhat.data();
  for (std::size_t i = 0; i < yv.size(); ++i) {
    const double d = yv[i] - pv[i];
    if (d * d > 1.0) {
      throw DomainError("lmse: (y - yhat)^2 = " + std::to_string(d * d) +
                        " at element " + std::to_string(i) + " exceeds 1");
    }
  }
  Tensor d = sub(y, yhat);
  Tensor e = mul(d, d);
  // 1 + epsilon - e, then flip-and-log.
  return mean(neg(log(add_scalar(neg(e), 1.0 + epsilon))));
}

Tensor fl_transform(const Tensor& base_values, double epsilon,
                    bool scale_trick) {
  auto bv = base_values.data();
  double max_base = 0.0;
  for (std::size_t i = 0; i < bv.size(); ++i) {
    if (bv[i] < 0.0) {
      throw DomainError("fl_transform: base value " + std::to_string(bv[i]) +
                        " at element " + std::to_string(i) + " is negative");
    }
    max_base = std::max(max_base, bv[i]);
  }
  if (scale_trick) {
    if (max_base == 0.0) return Tensor::scalar(0.0);
    // Normalizer is detached: a constant scale, not a graph node.
    Tensor scaled = mul_scalar(base_values, (1.0 - epsilon) / max_base);
    return mean(neg(log(add_scalar(neg(scaled), 1.0))));
  }
  return mean(neg(log(add_scalar(neg(base_values), 1.0 + epsilon))));
}

Tensor per_element_base(LossKind inner, const Tensor& y, const Tensor& yhat) {
  check_shapes("per_element_base", y, yhat);
  switch (inner) {
    case LossKind::Mse: {
      Tensor d = sub(y, yhat);
      return mul(d, d);
    }
    case LossKind::Mae:
      return abs(sub(y, yhat));
    case LossKind::Msle: {
      Tensor d = sub(log1p(y), log1p(yhat));
      return mul(d, d);
    }
    default:
      throw ContractError("per_element_base: inner loss must be mse, mae or msle");
  }
}

Tensor loss_value(const LossSpec& spec, const Tensor& y, const Tensor& yhat) {
  switch (spec.kind) {
    case LossKind::Mse: return mse(y, yhat);
    case LossKind::Mae: return mae(y, yhat);
    case LossKind::Msle: return msle(y, yhat);
    case LossKind::Lmse: return lmse(y, yhat, spec.epsilon);
    case LossKind::Fl:
      return fl_transform(per_element_base(spec.fl_inner, y, yhat),
                          spec.epsilon, spec.scale_trick);
  }
  throw ContractError("loss_value: bad loss kind");
}

Tensor grad_mse(const Tensor& y, const Tensor& yhat) {
  check_shapes("grad_mse", y, yhat);
  Tensor g(y.shape());
  auto yv = y.data();
  auto pv = yhat.data();
  auto gv = g.data();
  const double inv_n = 1.0 / static_cast<double>(y.numel());
  for (std::size_t i = 0; i < gv.size(); ++i) {
    gv[i] = (-2.0 * yv[i] + 2.0 * pv[i]) * inv_n;
  }
  return g;
}

Tensor grad_lmse(const Tensor& y, const Tensor& yhat, double epsilon) {
  check_shapes("grad_lmse", y, yhat);
  Tensor g(y.shape());
  auto yv = y.data();
  auto pv = yhat.data();
  auto gv = g.data();
  const double inv_n = 1.0 / static_cast<double>(y.numel());
  for (std::size_t i = 0; i < gv.size(); ++i) {
    const double d = yv[i] - pv[i];
    const double e = d * d;
    if (e > 1.0) {
      throw DomainError("grad_lmse: (y - yhat)^2 = " + std::to_string(e) +
                        " at element " + std::to_string(i) + " exceeds 1");
    }
    gv[i] = (-2.0 * yv[i] + 2.0 * pv[i]) * inv_n / (1.0 + epsilon - e);
  }
  return g;
}

namespace {

double surface_value(LossKind kind, SurfaceQuantity quantity, double y,
                     double yhat, double eps) {
  const double d = y - yhat;
  if (quantity == SurfaceQuantity::Loss) {
    switch (kind) {
      case LossKind::Mse: return d * d;
      case LossKind::Mae: return std::fabs(d);
      case LossKind::Msle: {
        const double l = std::log1p(y) - std::log1p(yhat);
        return l * l;
      }
      case LossKind::Lmse: return -std::log(1.0 + eps - d * d);
      default:
        throw ContractError("surface_grid: unsupported loss kind");
    }
  }
  // d/dyhat at N = 1.
  switch (kind) {
    case LossKind::Mse: return -2.0 * y + 2.0 * yhat;
    case LossKind::Mae: return yhat > y ? 1.0 : (yhat < y ? -1.0 : 0.0);
    case LossKind::Msle:
      return 2.0 * (std::log1p(yhat) - std::log1p(y)) / (1.0 + yhat);
    case LossKind::Lmse:
      return (-2.0 * y + 2.0 * yhat) / (1.0 + eps - d * d);
    default:
      throw ContractError("surface_grid: unsupported loss kind");
  }
}

}  // namespace

SurfaceGrid surface_grid(LossKind kind, SurfaceQuantity quantity,
                         int resolution, std::optional<double> clip,
                         double epsilon) {
  if (resolution < 2) throw ContractError("surface_grid: resolution must be >= 2");
  if (clip && !(*clip > 0.0)) throw ContractError("surface_grid: clip must be positive");
  SurfaceGrid grid;
  grid.kind = kind;
  grid.quantity = quantity;
  grid.epsilon = epsilon;
  grid.clip = clip;
  grid.axis.resize(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    grid.axis[static_cast<std::size_t>(i)] =
        static_cast<double>(i) / static_cast<double>(resolution - 1);
  }
  grid.z.resize(static_cast<std::size_t>(resolution) * resolution);
  grid.clipped.assign(grid.z.size(), 0);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const std::size_t cell = static_cast<std::size_t>(i) * resolution + j;
      double z = surface_value(kind, quantity, grid.axis[i], grid.axis[j],
                               epsilon);
      if (clip && std::fabs(z) > *clip) {
        z = (z > 0.0 ? *clip : -*clip);
        grid.clipped[cell] = 1;
      }
      grid.z[cell] = z;
    }
  }
  return grid;
}

void write_surface_csv(const SurfaceGrid& grid, std::ostream& out) {
  out << "y,yhat,z,clipped\n";
  const int res = grid.resolution();
  char buf[3 * 32];
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const std::size_t cell = static_cast<std::size_t>(i) * res + j;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", grid.axis[i],
                    grid.axis[j], grid.z[cell]);
      out << buf << ',' << int(grid.clipped[cell]) << '\n';
    }
  }
}

void write_surface_csv(const SurfaceGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_surface_csv(grid, out);
}

}  // namespace fliplog
