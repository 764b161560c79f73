#ifndef RHYME_MIMIC_POSE_FEATURES_HPP
#define RHYME_MIMIC_POSE_FEATURES_HPP

#include <array>
#include <optional>

#include "rhyme_mimic/skeleton.hpp"

namespace rhyme_mimic {

inline constexpr std::size_t pose_feature_dim = 16;

/// Absolute tolerance on the line determinant and on both denominators.
inline constexpr double degeneracy_tolerance = 1e-9;

/// Interleaved (x, y) per upper-body joint 1..8.
using NormalizedPose = std::array<double, pose_feature_dim>;

/// Joints whose lines define the reference point: line (a1, a2) meets line
/// (b1, b2). The x denominator is |x_a1 - x_a2|, the y denominator |y_b1 - y_b2|.
struct ReferenceJoints {
    int a1 = 1;
    int a2 = 2;
    int b1 = 3;
    int b2 = 4;

    friend bool operator==(const ReferenceJoints&, const ReferenceJoints&) = default;

    /// Throws std::invalid_argument unless every index lies in 1..8 and each pair is distinct.
    void validate() const;
};

/// Intersection of the infinite lines through (a1, a2) and (b1, b2), or
/// nullopt when they are parallel or a pair collapses to a point.
std::optional<Point2> intersect_lines(Point2 a1, Point2 a2, Point2 b1, Point2 b2);

/// Translation- and per-axis-scale-invariant feature vector. nullopt means the
/// frame is degenerate and should be skipped.
std::optional<NormalizedPose> normalize(const UpperBodyJoints& joints, const ReferenceJoints& reference = {});

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_POSE_FEATURES_HPP
