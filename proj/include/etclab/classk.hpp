#pragma once

// Class-K function descriptions used for the trigger dynamics (alpha1, alpha2)
// and for Lyapunov lower bounds. A spec is a value object; evaluation is pure.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace etclab {

class ClassK {
  public:
    enum class Kind { Zero, Linear, Power, Table };

    static ClassK zero() { return ClassK(Kind::Zero, 0.0, 0.0); }

    static ClassK linear(double slope) {
        if (!(slope > 0.0)) throw std::invalid_argument("ClassK::linear: slope must be > 0");
        return ClassK(Kind::Linear, slope, 1.0);
    }

    static ClassK power(double coef, double exponent) {
        if (!(coef > 0.0) || !(exponent > 0.0))
            throw std::invalid_argument("ClassK::power: coef and exponent must be > 0");
        return ClassK(Kind::Power, coef, exponent);
    }

    /// Piecewise-linear interpolation of (r, value) knots. Must start at
    /// (0, 0) and be strictly increasing; extended linearly past the last knot.
    static ClassK table(std::vector<std::pair<double, double>> knots) {
        if (knots.size() < 2 || knots.front().first != 0.0 || knots.front().second != 0.0)
            throw std::invalid_argument("ClassK::table: knots must start at (0,0)");
        for (std::size_t i = 1; i < knots.size(); ++i) {
            if (!(knots[i].first > knots[i - 1].first) || !(knots[i].second > knots[i - 1].second))
                throw std::invalid_argument("ClassK::table: knots must be strictly increasing");
        }
        ClassK k(Kind::Table, 0.0, 0.0);
        k.knots_ = std::move(knots);
        return k;
    }

    double operator()(double r) const {
        switch (kind_) {
            case Kind::Zero:
                return 0.0;
            case Kind::Linear:
                return a_ * r;
            case Kind::Power:
                return a_ * std::pow(r, b_);
            case Kind::Table: {
                if (r <= 0.0) return 0.0;
                auto it = std::upper_bound(knots_.begin(), knots_.end(), r,
                                           [](double x, const auto& kn) { return x < kn.first; });
                if (it == knots_.end()) {
                    // linear continuation with the last segment's slope
                    const auto& p1 = knots_[knots_.size() - 2];
                    const auto& p2 = knots_.back();
                    const double slope = (p2.second - p1.second) / (p2.first - p1.first);
                    return p2.second + slope * (r - p2.first);
                }
                const auto& hi = *it;
                const auto& lo = *(it - 1);
                const double w = (r - lo.first) / (hi.first - lo.first);
                return lo.second + w * (hi.second - lo.second);
            }
        }
        return 0.0;
    }

    Kind kind() const { return kind_; }
    bool is_zero() const { return kind_ == Kind::Zero; }

    /// Slope when linear; nan otherwise.
    double linear_slope() const { return kind_ == Kind::Linear ? a_ : std::nan(""); }

    /// Inverse by bisection (strictly increasing variants only).
    double inverse(double y) const {
        if (is_zero()) throw std::domain_error("ClassK::inverse: zero function is not invertible");
        if (y <= 0.0) return 0.0;
        if (kind_ == Kind::Linear) return y / a_;
        if (kind_ == Kind::Power) return std::pow(y / a_, 1.0 / b_);
        double lo = 0.0, hi = 1.0;
        while ((*this)(hi) < y) {
            hi *= 2.0;
            if (hi > 1e300) throw std::runtime_error("ClassK::inverse: target unreachable");
        }
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if ((*this)(mid) < y)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    /// Sampled check that this function dominates slope*r on (0, r_max].
    bool dominates_linear(double slope, double r_max, int grid = 256) const {
        for (int i = 1; i <= grid; ++i) {
            const double r = r_max * static_cast<double>(i) / grid;
            if ((*this)(r) < slope * r) return false;
        }
        return true;
    }

  private:
    ClassK(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}

    Kind kind_;
    double a_;
    double b_;
    std::vector<std::pair<double, double>> knots_;
};

}  // namespace etclab
