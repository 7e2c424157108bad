#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "modec/mlp.hpp"

namespace modec {

enum class CurveKind { segment, polychain, bezier };

// Parametric curve in weight space. Endpoints are fixed; the bends are the
// trainable control points (polychain turning points or Bezier controls).
struct CurveSpec {
    CurveKind kind = CurveKind::segment;
    WeightVector start;
    WeightVector end;
    std::vector<WeightVector> bends;

    std::size_t n_bends() const { return bends.size(); }
    void validate() const;
};

// Affine coefficients on the node sequence (start, bend_1..bend_n, end).
struct CurveCoefficients {
    double t = 0.0;
    std::vector<double> coeffs;
};

CurveCoefficients coefficients(CurveKind kind, std::size_t n_bends, double t);

// Derivatives dc_i/dt on the same node sequence; at polychain knots the
// left segment's slope is used.
std::vector<double> coefficient_derivatives(CurveKind kind, std::size_t n_bends, double t);

WeightVector point_at(const CurveSpec& spec, double t);

// Tangent phi'(t) from the analytic parametrization derivatives.
WeightVector tangent_at(const CurveSpec& spec, double t);

// Jacobian of phi w.r.t. each bend is coeff * identity, so the bend
// gradient is a scalar multiple of the loss gradient at phi(t).
std::vector<WeightVector> backprop_to_bends(const CurveSpec& spec, double t,
                                            const WeightVector& grad_phi);

struct ArclengthResult {
    double length = 0.0;
    double ratio = 0.0;  // length / ||end - start||
};

ArclengthResult arclength(const CurveSpec& spec, std::size_t grid_size);

// Bends placed at equally spaced points of the straight segment; n=1 puts
// the single bend at the midpoint. Optional seeded Gaussian jitter.
std::vector<WeightVector> init_bends(const WeightVector& start, const WeightVector& end,
                                     std::size_t n, std::optional<std::uint64_t> jitter_seed = {},
                                     double jitter_scale = 0.0);

double l2_distance(const WeightVector& a, const WeightVector& b);

}  // namespace modec
