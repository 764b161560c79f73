#ifndef RHYME_MIMIC_TEST_ORACLES_HPP
#define RHYME_MIMIC_TEST_ORACLES_HPP

// Independent reference computations. Nothing here calls the library code it checks.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/pose_features.hpp"
#include "rhyme_mimic/rng.hpp"
#include "rhyme_mimic/skeleton.hpp"

namespace oracle {

std::string fixture_path(const std::string& name);
std::string read_file(const std::string& path);

/// Solves a1 + t (a2 - a1) = b1 + s (b2 - b1) with a QR factorization.
std::optional<rhyme_mimic::Point2> line_intersection_qr(rhyme_mimic::Point2 a1, rhyme_mimic::Point2 a2,
                                                        rhyme_mimic::Point2 b1, rhyme_mimic::Point2 b2);

/// The normalization formula, with the reference point found through
/// homogeneous-coordinate cross products.
std::optional<std::array<double, 16>> normalize_homogeneous(const std::array<rhyme_mimic::Point2, 8>& joints,
                                                            std::array<int, 4> reference = {1, 2, 3, 4});

/// Mixture density by direct summation with an explicit inverse and determinant.
double mixture_density_direct(const std::vector<double>& weights, const std::vector<Eigen::VectorXd>& means,
                              const std::vector<Eigen::MatrixXd>& covariances, const Eigen::VectorXd& x);

/// Area of the bounding box of joints with positive confidence.
double confident_bbox_area(const rhyme_mimic::SkeletonFrame& frame);

/// Random 8-joint upper body with a well-conditioned reference geometry.
std::array<rhyme_mimic::Point2, 8> random_upper_body(rhyme_mimic::Rng& rng);

rhyme_mimic::UpperBodyJoints to_upper_body(const std::array<rhyme_mimic::Point2, 8>& joints);

/// Two-cluster data in `dim` dimensions with means `separation` apart per axis.
rhyme_mimic::LabeledDataset separated_classes(std::size_t classes, std::size_t per_class, std::size_t dim,
                                              double separation, std::uint64_t seed);

}  // namespace oracle

#endif
