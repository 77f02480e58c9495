#pragma once

#include "ivsel/nuisance.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ivsel {

enum class WeightMode { point, partial };
std::string_view to_string(WeightMode m);

/// Per-row flags on a weight vector.
enum WeightFlag : std::uint8_t {
    kDenominatorFloored = 1,  // |cov(D,Z|X)| estimate fell below eps_denom
    kRatioClipped = 2,        // r(X) estimate left [0, 1]
};

struct WeightVector {
    std::vector<double> w;
    WeightMode mode = WeightMode::point;
    std::vector<int> fold;
    std::vector<std::uint8_t> flags;
    std::vector<double> ratio;  // point mode: r(X) before clipping

    std::size_t size() const { return w.size(); }
    bool clipped(std::size_t i) const { return flags[i] != 0; }
    double flag_rate() const;
};

struct IntervalBounds {
    std::vector<double> l, u;
    std::vector<bool> crossed;  // l > u before the midpoint repair
    std::vector<int> fold;

    std::size_t size() const { return l.size(); }
    double crossed_rate() const;
};

inline constexpr double kDefaultEpsDenom = 1e-3;

/// w = clip(r, 0, 1) - 1/2 with r = cov(DY,Z|X) / cov(D,Z|X) from the pooled
/// nuisances.
WeightVector point_weight(const NuisanceSet& nuis, double eps_denom = kDefaultEpsDenom);

/// Per-z bounds on E[Y*|X] under a(X) <= E[Y*|X,U] <= b(X).
IntervalBounds partial_bounds(const NuisanceSet& nuis, const std::vector<double>& a,
                              const std::vector<double>& b);
IntervalBounds partial_bounds(const NuisanceSet& nuis, double a = 0.0, double b = 1.0);

/// w = max(u - 1/2, 0) + min(l - 1/2, 0).
WeightVector partial_weight(const IntervalBounds& bounds);

/// Binary-instrument observed distribution P(Y, D | Z).
struct ObservableDistribution {
    // index 0 / 1 is the instrument value
    double p_na[2] = {0, 0};  // P(D=0 | Z=z)
    double p_01[2] = {0, 0};  // P(Y=0, D=1 | Z=z)
    double p_11[2] = {0, 0};  // P(Y=1, D=1 | Z=z)

    void validate() const;
    std::array<double, 6> as_vector() const {
        return {p_na[0], p_01[0], p_11[0], p_na[1], p_01[1], p_11[1]};
    }
};

/// Aggregate distribution of a two-judge dataset; judge 1 is z=0.
ObservableDistribution observable_from_dataset(const SelectiveDataset& ds);

struct MeanBounds {
    double lower;
    double upper;
};

/// Sharp bounds on E[Y*] as the min / max of q01 + q11 + q21 + q31 over
/// response-type distributions q >= 0, sum q = 1, P q = p.
MeanBounds balke_pearl_lp(const ObservableDistribution& p);

/// L = max_z p_11,z and U = min_z (p_11,z + p_na,z).
MeanBounds manski_closed_form(const ObservableDistribution& p);

}  // namespace ivsel
