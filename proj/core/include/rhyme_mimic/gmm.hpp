#ifndef RHYME_MIMIC_GMM_HPP
#define RHYME_MIMIC_GMM_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rhyme_mimic/pose_features.hpp"
#include "rhyme_mimic/rng.hpp"

namespace rhyme_mimic {

class GmmError : public std::runtime_error {
public:
    enum class Kind {
        insufficient_samples,
        singular_covariance,
        dimension_mismatch,
        empty_dataset,
        unknown_label,
        version_mismatch,
        corrupt_model,
    };

    GmmError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

enum class CovarianceKind { diagonal, full };

std::string_view to_string(CovarianceKind kind) noexcept;
CovarianceKind parse_covariance_kind(std::string_view text);

/// One weighted Gaussian. The Cholesky factor and normalizer are computed
/// once at construction, so a component is immutable and thread-safe.
class GaussianComponent {
public:
    static GaussianComponent diagonal(double weight, Eigen::VectorXd mean, Eigen::VectorXd variances);
    /// Throws GmmError(singular_covariance) if the matrix is not positive definite.
    static GaussianComponent full(double weight, Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    double weight() const noexcept { return weight_; }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }
    CovarianceKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }

    /// Diagonal variances (diagonal kind) or the covariance diagonal (full kind).
    Eigen::VectorXd variances() const;
    /// Dense covariance; diagonal kind expands to a diagonal matrix.
    Eigen::MatrixXd covariance() const;

    /// log N(x; mean, covariance), without the mixture weight.
    double log_pdf(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    friend bool operator==(const GaussianComponent& a, const GaussianComponent& b);

private:
    GaussianComponent() = default;

    double weight_ = 1.0;
    Eigen::VectorXd mean_;
    CovarianceKind kind_ = CovarianceKind::diagonal;
    Eigen::VectorXd variances_;     // diagonal kind
    Eigen::MatrixXd covariance_;    // full kind
    Eigen::MatrixXd cholesky_;      // lower factor, full kind
    double log_normalizer_ = 0.0;   // -0.5 * (d log 2pi + log det)
};

struct ClassModel {
    std::string label;
    std::vector<GaussianComponent> components;

    std::size_t dim() const { return components.empty() ? 0 : components.front().dim(); }
};

/// log sum_k w_k N(x; mu_k, Sigma_k), stabilized with log-sum-exp.
double log_density(const ClassModel& model, std::span<const double> x);

struct Classification {
    std::size_t class_index = 0;
    double score = 0.0;        // log prior + log density of the winner
    double log_density = 0.0;  // winner's mixture log density
    bool rejected = false;

    bool accepted() const noexcept { return !rejected; }
};

struct GmmClassifier {
    std::vector<ClassModel> classes;
    std::vector<double> priors;
    std::optional<double> rejection_log_density;
    std::size_t feature_dim = pose_feature_dim;
    ReferenceJoints reference{};
    CovarianceKind covariance_kind = CovarianceKind::diagonal;

    /// Argmax of log prior + log density; ties go to the lowest class index.
    Classification classify(std::span<const double> features) const;

    const std::string& label(std::size_t class_index) const { return classes.at(class_index).label; }
    std::optional<std::size_t> index_of(std::string_view label) const;
};

struct LabeledSample {
    std::string label;
    std::vector<double> features;
};

struct LabeledDataset {
    /// Declared label set; its order fixes class indices.
    std::vector<std::string> labels;
    std::vector<LabeledSample> records;

    void add(std::string label, std::vector<double> features);
    std::optional<std::size_t> index_of(std::string_view label) const;
    std::vector<std::size_t> class_counts() const;
    bool empty() const noexcept { return records.empty(); }
};

struct TrainingConfig {
    std::size_t components_per_class = 1;
    CovarianceKind covariance_kind = CovarianceKind::diagonal;
    std::size_t max_iterations = 200;
    double log_likelihood_tolerance = 1e-6;
    double variance_floor = 1e-6;
    double ridge_lambda = 1e-4;
    std::uint64_t rng_seed = 0;
};

struct EmTrace {
    /// Total log-likelihood after every E step, one entry per iteration. For
    /// full covariance this includes the covariance prior term, which is the
    /// quantity EM increases.
    std::vector<double> log_likelihood;
    /// Largest |sum_k r_ik - 1| seen in any E step.
    double max_responsibility_error = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

struct MixtureFit {
    std::vector<GaussianComponent> components;
    EmTrace trace;
};

/// EM from a k-means++ seeding. Rows of `samples` are observations.
MixtureFit em_fit(const Eigen::MatrixXd& samples, std::size_t components, const TrainingConfig& config, Rng& rng);

struct TrainingReport {
    std::vector<std::string> labels;
    std::vector<EmTrace> traces;  // one per class, same order as labels
};

GmmClassifier train(const LabeledDataset& data, const TrainingConfig& config, TrainingReport* report = nullptr);

struct EvaluationReport {
    std::vector<std::string> labels;
    /// Rows are true labels, columns predicted labels; the extra last column counts rejections.
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<double> per_class_recall;
    std::vector<std::size_t> support;
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

EvaluationReport evaluate(const GmmClassifier& classifier, const LabeledDataset& test);

/// Stratified split; each class keeps round(fraction * n) records for
/// training, clamped so both sides get at least one.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double train_fraction,
                                                std::uint64_t rng_seed);

inline constexpr int model_format_version = 1;

std::string save_model(const GmmClassifier& classifier);
GmmClassifier load_model(std::string_view bytes);
void save_model_file(const GmmClassifier& classifier, const std::string& path);
GmmClassifier load_model_file(const std::string& path);

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_GMM_HPP
