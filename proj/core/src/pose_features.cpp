#include "rhyme_mimic/pose_features.hpp"

#include <cmath>
#include <stdexcept>

namespace rhyme_mimic {

void ReferenceJoints::validate() const {
    for (int j : {a1, a2, b1, b2}) {
        if (j < 1 || j > 8) throw std::invalid_argument("reference joint indices must lie in 1..8");
    }
    if (a1 == a2 || b1 == b2) throw std::invalid_argument("reference joint pairs must be distinct joints");
}

std::optional<Point2> intersect_lines(Point2 a1, Point2 a2, Point2 b1, Point2 b2) {
    const double dax = a2.x - a1.x;
    const double day = a2.y - a1.y;
    const double dbx = b2.x - b1.x;
    const double dby = b2.y - b1.y;
    const double det = dax * dby - day * dbx;
    if (!(std::abs(det) >= degeneracy_tolerance)) return std::nullopt;

    // a1 + t * da = b1 + s * db, solved for t by Cramer's rule.
    const double t = ((b1.x - a1.x) * dby - (b1.y - a1.y) * dbx) / det;
    const Point2 p{a1.x + t * dax, a1.y + t * day};
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
    return p;
}

std::optional<NormalizedPose> normalize(const UpperBodyJoints& joints, const ReferenceJoints& reference) {
    reference.validate();
    const Point2& a1 = joints.joint(reference.a1);
    const Point2& a2 = joints.joint(reference.a2);
    const Point2& b1 = joints.joint(reference.b1);
    const Point2& b2 = joints.joint(reference.b2);

    const auto origin = intersect_lines(a1, a2, b1, b2);
    if (!origin) return std::nullopt;

    const double x_scale = std::abs(a1.x - a2.x);
    const double y_scale = std::abs(b1.y - b2.y);
    if (!(x_scale >= degeneracy_tolerance) || !(y_scale >= degeneracy_tolerance)) return std::nullopt;

    NormalizedPose out{};
    for (std::size_t j = 0; j < joints.positions.size(); ++j) {
        out[2 * j] = (joints.positions[j].x - origin->x) / x_scale;
        out[2 * j + 1] = (joints.positions[j].y - origin->y) / y_scale;
        if (!std::isfinite(out[2 * j]) || !std::isfinite(out[2 * j + 1])) return std::nullopt;
    }
    return out;
}

}  // namespace rhyme_mimic
