#include "modec/curve.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "modec/rng.hpp"

namespace modec {

void CurveSpec::validate() const {
    if (start.values.size() != end.values.size() || !(start.layout == end.layout))
        throw std::invalid_argument("curve endpoints have different layouts");
    for (const auto& b : bends)
        if (b.values.size() != start.values.size() || !(b.layout == start.layout))
            throw std::invalid_argument("bend layout differs from endpoints");
    if (kind == CurveKind::segment && !bends.empty())
        throw std::invalid_argument("segment carries no bends");
    if (kind != CurveKind::segment && bends.empty())
        throw std::invalid_argument("polychain/bezier needs at least one bend");
}

namespace {

void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("t outside [0, 1]");
}

std::vector<double> binomial_row(std::size_t n) {
    std::vector<double> row(n + 1, 1.0);
    for (std::size_t i = 1; i <= n; ++i)
        row[i] = row[i - 1] * static_cast<double>(n - i + 1) / static_cast<double>(i);
    return row;
}

// Segment index for a polychain; interior knots (and t=1) belong to the
// left segment.
std::size_t polychain_segment(std::size_t n_bends, double t, double& local) {
    const double u = t * static_cast<double>(n_bends + 1);
    std::size_t i = static_cast<std::size_t>(std::floor(u));
    if (i > 0 && static_cast<double>(i) == u) --i;
    if (i > n_bends) i = n_bends;
    local = u - static_cast<double>(i);
    return i;
}

}  // namespace

CurveCoefficients coefficients(CurveKind kind, std::size_t n_bends, double t) {
    check_t(t);
    CurveCoefficients out;
    out.t = t;
    switch (kind) {
        case CurveKind::segment:
            out.coeffs = {1.0 - t, t};
            break;
        case CurveKind::polychain: {
            if (n_bends == 0) throw std::invalid_argument("polychain needs bends");
            out.coeffs.assign(n_bends + 2, 0.0);
            double s;
            const std::size_t i = polychain_segment(n_bends, t, s);
            out.coeffs[i] = 1.0 - s;
            out.coeffs[i + 1] = s;
            break;
        }
        case CurveKind::bezier: {
            if (n_bends == 0) throw std::invalid_argument("bezier needs bends");
            const std::size_t deg = n_bends + 1;
            const auto binom = binomial_row(deg);
            out.coeffs.assign(deg + 1, 0.0);
            for (std::size_t i = 0; i <= deg; ++i)
                out.coeffs[i] = binom[i] * std::pow(t, static_cast<double>(i)) *
                                std::pow(1.0 - t, static_cast<double>(deg - i));
            break;
        }
    }
    return out;
}

std::vector<double> coefficient_derivatives(CurveKind kind, std::size_t n_bends, double t) {
    check_t(t);
    switch (kind) {
        case CurveKind::segment:
            return {-1.0, 1.0};
        case CurveKind::polychain: {
            std::vector<double> dc(n_bends + 2, 0.0);
            double s;
            const std::size_t i = polychain_segment(n_bends, t, s);
            const double slope = static_cast<double>(n_bends + 1);
            dc[i] = -slope;
            dc[i + 1] = slope;
            return dc;
        }
        case CurveKind::bezier: {
            const std::size_t deg = n_bends + 1;
            const auto binom = binomial_row(deg);
            std::vector<double> dc(deg + 1, 0.0);
            for (std::size_t i = 0; i <= deg; ++i) {
                double d = 0.0;
                if (i > 0)
                    d += static_cast<double>(i) * std::pow(t, static_cast<double>(i - 1)) *
                         std::pow(1.0 - t, static_cast<double>(deg - i));
                if (i < deg)
                    d -= static_cast<double>(deg - i) * std::pow(t, static_cast<double>(i)) *
                         std::pow(1.0 - t, static_cast<double>(deg - i - 1));
                dc[i] = binom[i] * d;
            }
            return dc;
        }
    }
    throw std::logic_error("unreachable");
}

namespace {

WeightVector weighted_sum(const CurveSpec& spec, const std::vector<double>& weights) {
    WeightVector out;
    out.layout = spec.start.layout;
    out.values.assign(spec.start.values.size(), 0.0);
    const auto accumulate = [&out](double c, const WeightVector& v) {
        if (c == 0.0) return;  // skipping zeros keeps endpoint values bit-exact
        for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += c * v.values[k];
    };
    accumulate(weights.front(), spec.start);
    for (std::size_t i = 0; i < spec.bends.size(); ++i) accumulate(weights[i + 1], spec.bends[i]);
    accumulate(weights.back(), spec.end);
    return out;
}

}  // namespace

WeightVector point_at(const CurveSpec& spec, double t) {
    spec.validate();
    return weighted_sum(spec, coefficients(spec.kind, spec.n_bends(), t).coeffs);
}

WeightVector tangent_at(const CurveSpec& spec, double t) {
    spec.validate();
    return weighted_sum(spec, coefficient_derivatives(spec.kind, spec.n_bends(), t));
}

std::vector<WeightVector> backprop_to_bends(const CurveSpec& spec, double t,
                                            const WeightVector& grad_phi) {
    spec.validate();
    if (grad_phi.values.size() != spec.start.values.size())
        throw std::invalid_argument("grad layout mismatch");
    const auto c = coefficients(spec.kind, spec.n_bends(), t);
    std::vector<WeightVector> grads;
    grads.reserve(spec.n_bends());
    for (std::size_t i = 0; i < spec.n_bends(); ++i) {
        WeightVector g;
        g.layout = grad_phi.layout;
        g.values.resize(grad_phi.values.size());
        const double ci = c.coeffs[i + 1];
        for (std::size_t k = 0; k < g.values.size(); ++k) g.values[k] = ci * grad_phi.values[k];
        grads.push_back(std::move(g));
    }
    return grads;
}

double l2_distance(const WeightVector& a, const WeightVector& b) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        const double d = a.values[k] - b.values[k];
        sq += d * d;
    }
    return std::sqrt(sq);
}

ArclengthResult arclength(const CurveSpec& spec, std::size_t grid_size) {
    spec.validate();
    if (grid_size < 2) throw std::invalid_argument("arclength needs grid_size >= 2");
    const double chord = l2_distance(spec.start, spec.end);
    if (chord == 0.0)
        throw std::invalid_argument("coincident endpoints: length ratio undefined");
    ArclengthResult res;
    WeightVector prev = point_at(spec, 0.0);
    for (std::size_t k = 1; k < grid_size; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(grid_size - 1);
        WeightVector cur = point_at(spec, t);
        res.length += l2_distance(prev, cur);
        prev = std::move(cur);
    }
    res.ratio = res.length / chord;
    return res;
}

std::vector<WeightVector> init_bends(const WeightVector& start, const WeightVector& end,
                                     std::size_t n, std::optional<std::uint64_t> jitter_seed,
                                     double jitter_scale) {
    if (n == 0) throw std::invalid_argument("init_bends needs n >= 1");
    std::vector<WeightVector> bends;
    bends.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n + 1);
        WeightVector b;
        b.layout = start.layout;
        b.values.resize(start.values.size());
        for (std::size_t k = 0; k < b.values.size(); ++k)
            b.values[k] = (1.0 - t) * start.values[k] + t * end.values[k];
        bends.push_back(std::move(b));
    }
    if (jitter_seed && jitter_scale > 0.0) {
        auto rng = make_rng(*jitter_seed, Stream::jitter);
        std::normal_distribution<double> normal(0.0, jitter_scale);
        for (auto& b : bends)
            for (double& v : b.values) v += normal(rng);
    }
    return bends;
}

}  // namespace modec
