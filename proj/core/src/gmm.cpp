#include "rhyme_mimic/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

namespace rhyme_mimic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double log_two_pi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr double min_component_mass = 1e-10;

double log_sum_exp(const VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

Eigen::Map<const VectorXd> as_vector(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

// Squared distance from each row to its nearest chosen center.
VectorXd nearest_sq_distance(const MatrixXd& samples, const std::vector<VectorXd>& centers) {
    VectorXd d(samples.rows());
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) best = std::min(best, (samples.row(i).transpose() - c).squaredNorm());
        d(i) = best;
    }
    return d;
}

std::vector<VectorXd> kmeans_plus_plus(const MatrixXd& samples, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(samples.rows());
    std::vector<VectorXd> centers;
    centers.push_back(samples.row(static_cast<Eigen::Index>(uniform_index(rng, n))).transpose());
    while (centers.size() < k) {
        const VectorXd d = nearest_sq_distance(samples, centers);
        const double total = d.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            pick = samples.rows() - 1;
            for (Eigen::Index i = 0; i < samples.rows(); ++i) {
                acc += d(i);
                if (acc > target && d(i) > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(uniform_index(rng, n));
        }
        centers.push_back(samples.row(pick).transpose());
    }
    return centers;
}

// Full covariance is a MAP update under a fixed inverse-Wishart-style prior
// exp(-tr(lambda * n * Sigma^-1) / 2), with n the class sample count: the
// ridge then equals lambda exactly for a single component, and EM stays
// monotone in the penalized objective.
GaussianComponent make_component(const TrainingConfig& config, double weight, VectorXd mean, const MatrixXd& centered,
                                 const VectorXd& resp, double mass, double prior_scale) {
    if (config.covariance_kind == CovarianceKind::diagonal) {
        VectorXd var = (centered.array().square().colwise() * resp.array()).colwise().sum().transpose() / mass;
        var = var.cwiseMax(config.variance_floor);
        return GaussianComponent::diagonal(weight, std::move(mean), std::move(var));
    }
    const auto d = mean.size();
    MatrixXd cov = centered.transpose() * resp.asDiagonal() * centered;
    cov = 0.5 * (cov + cov.transpose()).eval();
    cov += config.ridge_lambda * prior_scale * MatrixXd::Identity(d, d);
    cov /= mass;
    return GaussianComponent::full(weight, std::move(mean), std::move(cov));
}

// Per-sample log(w_k N(x_i | k)) for every component.
MatrixXd weighted_log_pdfs(const MatrixXd& samples, const std::vector<GaussianComponent>& comps) {
    MatrixXd out(samples.rows(), static_cast<Eigen::Index>(comps.size()));
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const double log_w = std::log(comps[k].weight());
        for (Eigen::Index i = 0; i < samples.rows(); ++i) {
            out(i, static_cast<Eigen::Index>(k)) = log_w + comps[k].log_pdf(samples.row(i).transpose());
        }
    }
    return out;
}

using json = nlohmann::json;

[[noreturn]] void corrupt(const std::string& what) {
    throw GmmError(GmmError::Kind::corrupt_model, "corrupt model: " + what);
}

VectorXd vector_from_json(const json& j, std::size_t dim) {
    if (!j.is_array() || j.size() != dim) corrupt("vector has wrong length");
    VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        if (!j[i].is_number()) corrupt("non-numeric vector entry");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

json vector_to_json(const VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

}  // namespace

std::string_view to_string(CovarianceKind kind) noexcept {
    return kind == CovarianceKind::diagonal ? "diagonal" : "full";
}

CovarianceKind parse_covariance_kind(std::string_view text) {
    if (text == "diagonal" || text == "diag") return CovarianceKind::diagonal;
    if (text == "full") return CovarianceKind::full;
    throw std::invalid_argument("unknown covariance kind '" + std::string(text) + "'");
}

GaussianComponent GaussianComponent::diagonal(double weight, VectorXd mean, VectorXd variances) {
    if (mean.size() != variances.size()) {
        throw GmmError(GmmError::Kind::dimension_mismatch, "mean and variance lengths differ");
    }
    if (!(variances.array() > 0.0).all()) {
        throw GmmError(GmmError::Kind::singular_covariance, "diagonal variances must be positive");
    }
    GaussianComponent c;
    c.weight_ = weight;
    c.kind_ = CovarianceKind::diagonal;
    c.log_normalizer_ = -0.5 * (static_cast<double>(mean.size()) * log_two_pi + variances.array().log().sum());
    c.mean_ = std::move(mean);
    c.variances_ = std::move(variances);
    return c;
}

GaussianComponent GaussianComponent::full(double weight, VectorXd mean, MatrixXd covariance) {
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
        throw GmmError(GmmError::Kind::dimension_mismatch, "covariance shape does not match mean");
    }
    Eigen::LLT<MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) {
        throw GmmError(GmmError::Kind::singular_covariance, "covariance is not positive definite");
    }
    GaussianComponent c;
    c.weight_ = weight;
    c.kind_ = CovarianceKind::full;
    c.cholesky_ = llt.matrixL();
    const double log_det = 2.0 * c.cholesky_.diagonal().array().log().sum();
    if (!std::isfinite(log_det)) {
        throw GmmError(GmmError::Kind::singular_covariance, "covariance determinant underflows");
    }
    c.log_normalizer_ = -0.5 * (static_cast<double>(mean.size()) * log_two_pi + log_det);
    c.mean_ = std::move(mean);
    c.covariance_ = std::move(covariance);
    return c;
}

VectorXd GaussianComponent::variances() const {
    return kind_ == CovarianceKind::diagonal ? variances_ : VectorXd(covariance_.diagonal());
}

MatrixXd GaussianComponent::covariance() const {
    return kind_ == CovarianceKind::full ? covariance_ : MatrixXd(variances_.asDiagonal());
}

double GaussianComponent::log_pdf(const Eigen::Ref<const VectorXd>& x) const {
    if (x.size() != mean_.size()) throw GmmError(GmmError::Kind::dimension_mismatch, "pose dimension mismatch");
    const VectorXd diff = x - mean_;
    double mahalanobis = 0.0;
    if (kind_ == CovarianceKind::diagonal) {
        mahalanobis = (diff.array().square() / variances_.array()).sum();
    } else {
        mahalanobis = cholesky_.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
    }
    return log_normalizer_ - 0.5 * mahalanobis;
}

bool operator==(const GaussianComponent& a, const GaussianComponent& b) {
    return a.kind_ == b.kind_ && a.weight_ == b.weight_ && a.mean_ == b.mean_ &&
           (a.kind_ == CovarianceKind::diagonal ? a.variances_ == b.variances_ : a.covariance_ == b.covariance_);
}

double log_density(const ClassModel& model, std::span<const double> x) {
    if (model.components.empty()) throw GmmError(GmmError::Kind::corrupt_model, "class model has no components");
    if (x.size() != model.dim()) {
        throw GmmError(GmmError::Kind::dimension_mismatch,
                       "pose has " + std::to_string(x.size()) + " features, model expects " +
                           std::to_string(model.dim()));
    }
    const auto v = as_vector(x);
    VectorXd terms(static_cast<Eigen::Index>(model.components.size()));
    for (std::size_t k = 0; k < model.components.size(); ++k) {
        const auto& c = model.components[k];
        terms(static_cast<Eigen::Index>(k)) = std::log(c.weight()) + c.log_pdf(v);
    }
    return log_sum_exp(terms);
}

Classification GmmClassifier::classify(std::span<const double> features) const {
    if (classes.empty()) throw GmmError(GmmError::Kind::corrupt_model, "classifier has no classes");
    if (features.size() != feature_dim) {
        throw GmmError(GmmError::Kind::dimension_mismatch,
                       "pose has " + std::to_string(features.size()) + " features, classifier expects " +
                           std::to_string(feature_dim));
    }
    Classification best;
    bool have = false;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const double density = log_density(classes[i], features);
        const double score = std::log(priors.at(i)) + density;
        if (!have || score > best.score) {
            best = {i, score, density, false};
            have = true;
        }
    }
    best.rejected = rejection_log_density.has_value() && best.log_density < *rejection_log_density;
    return best;
}

std::optional<std::size_t> GmmClassifier::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].label == label) return i;
    }
    return std::nullopt;
}

void LabeledDataset::add(std::string label, std::vector<double> features) {
    if (!index_of(label)) labels.push_back(label);
    records.push_back({std::move(label), std::move(features)});
}

std::optional<std::size_t> LabeledDataset::index_of(std::string_view label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& r : records) {
        const auto idx = index_of(r.label);
        if (!idx) throw GmmError(GmmError::Kind::unknown_label, "record label '" + r.label + "' is not declared");
        ++counts[*idx];
    }
    return counts;
}

MixtureFit em_fit(const MatrixXd& samples, std::size_t components, const TrainingConfig& config, Rng& rng) {
    const auto n = samples.rows();
    if (components < 1 || n < static_cast<Eigen::Index>(components) + 1) {
        throw GmmError(GmmError::Kind::insufficient_samples,
                       "EM with " + std::to_string(components) + " components needs at least " +
                           std::to_string(components + 1) + " samples, got " + std::to_string(n));
    }
    if (!samples.allFinite()) throw std::invalid_argument("EM samples must be finite");

    // Initial state: k-means++ means, pooled covariance, uniform weights.
    const VectorXd pooled_mean = samples.colwise().mean().transpose();
    const MatrixXd pooled_centered = samples.rowwise() - pooled_mean.transpose();
    const VectorXd ones = VectorXd::Ones(n);
    std::vector<GaussianComponent> comps;
    for (auto& center : kmeans_plus_plus(samples, components, rng)) {
        comps.push_back(make_component(config, 1.0 / static_cast<double>(components), std::move(center),
                                       pooled_centered, ones, static_cast<double>(n), static_cast<double>(n)));
    }

    MixtureFit fit;
    MatrixXd resp(n, static_cast<Eigen::Index>(components));
    auto e_step = [&] {
        const MatrixXd log_terms = weighted_log_pdfs(samples, comps);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const VectorXd row = log_terms.row(i).transpose();
            const double lse = log_sum_exp(row);
            total += lse;
            resp.row(i) = (row.array() - lse).exp().transpose();
            fit.trace.max_responsibility_error =
                std::max(fit.trace.max_responsibility_error, std::abs(resp.row(i).sum() - 1.0));
        }
        if (config.covariance_kind == CovarianceKind::full) {
            const double strength = config.ridge_lambda * static_cast<double>(n);
            for (const auto& c : comps) {
                const MatrixXd cov = c.covariance();
                total -= 0.5 * strength * cov.llt().solve(MatrixXd::Identity(cov.rows(), cov.cols())).trace();
            }
        }
        fit.trace.log_likelihood.push_back(total);
        return total;
    };

    double previous = e_step();
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        std::vector<GaussianComponent> next;
        next.reserve(components);
        VectorXd mass = resp.colwise().sum().transpose();
        mass = mass.cwiseMax(min_component_mass);
        const double mass_total = mass.sum();
        for (std::size_t k = 0; k < components; ++k) {
            const auto col = static_cast<Eigen::Index>(k);
            const VectorXd r = resp.col(col);
            VectorXd mean = (samples.transpose() * r) / mass(col);
            const MatrixXd centered = samples.rowwise() - mean.transpose();
            next.push_back(make_component(config, mass(col) / mass_total, std::move(mean), centered, r, mass(col),
                                          static_cast<double>(n)));
        }
        comps = std::move(next);
        fit.trace.iterations = iter + 1;

        const double current = e_step();
        if (std::abs(current - previous) < config.log_likelihood_tolerance) {
            fit.trace.converged = true;
            break;
        }
        previous = current;
    }
    fit.components = std::move(comps);
    return fit;
}

GmmClassifier train(const LabeledDataset& data, const TrainingConfig& config, TrainingReport* report) {
    if (data.empty()) throw GmmError(GmmError::Kind::empty_dataset, "training dataset is empty");
    if (config.components_per_class < 1) throw std::invalid_argument("components_per_class must be >= 1");
    if (!(config.variance_floor > 0.0) || !(config.ridge_lambda > 0.0) || !(config.log_likelihood_tolerance > 0.0)) {
        throw std::invalid_argument("variance floor, ridge and tolerance must be positive");
    }

    const std::size_t dim = data.records.front().features.size();
    const auto counts = data.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] < config.components_per_class + 1) {
            throw GmmError(GmmError::Kind::insufficient_samples,
                           "class '" + data.labels[c] + "' has " + std::to_string(counts[c]) +
                               " samples; need at least " + std::to_string(config.components_per_class + 1));
        }
    }

    GmmClassifier out;
    out.feature_dim = dim;
    out.covariance_kind = config.covariance_kind;
    if (report) *report = {};

    for (std::size_t c = 0; c < data.labels.size(); ++c) {
        MatrixXd samples(static_cast<Eigen::Index>(counts[c]), static_cast<Eigen::Index>(dim));
        Eigen::Index row = 0;
        for (const auto& r : data.records) {
            if (r.label != data.labels[c]) continue;
            if (r.features.size() != dim) {
                throw GmmError(GmmError::Kind::dimension_mismatch, "dataset records differ in feature length");
            }
            samples.row(row++) = as_vector(r.features).transpose();
        }
        Rng rng = make_rng(config.rng_seed, c);
        MixtureFit fit = em_fit(samples, config.components_per_class, config, rng);
        out.classes.push_back({data.labels[c], std::move(fit.components)});
        out.priors.push_back(static_cast<double>(counts[c]) / static_cast<double>(data.records.size()));
        if (report) {
            report->labels.push_back(data.labels[c]);
            report->traces.push_back(std::move(fit.trace));
        }
    }
    return out;
}

EvaluationReport evaluate(const GmmClassifier& classifier, const LabeledDataset& test) {
    if (test.empty()) throw GmmError(GmmError::Kind::empty_dataset, "evaluation dataset is empty");
    const std::size_t n = classifier.classes.size();
    EvaluationReport report;
    for (const auto& c : classifier.classes) report.labels.push_back(c.label);
    report.confusion.assign(n, std::vector<std::size_t>(n + 1, 0));
    report.support.assign(n, 0);

    for (const auto& r : test.records) {
        const auto truth = classifier.index_of(r.label);
        if (!truth) throw GmmError(GmmError::Kind::unknown_label, "label '" + r.label + "' unknown to the classifier");
        const Classification result = classifier.classify(r.features);
        const std::size_t column = result.rejected ? n : result.class_index;
        ++report.confusion[*truth][column];
        ++report.support[*truth];
        ++report.total;
        if (!result.rejected && result.class_index == *truth) ++report.correct;
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    report.per_class_recall.resize(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (report.support[i] > 0) {
            report.per_class_recall[i] =
                static_cast<double>(report.confusion[i][i]) / static_cast<double>(report.support[i]);
        }
    }
    return report;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double train_fraction,
                                                std::uint64_t rng_seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
    }
    std::vector<std::vector<std::size_t>> by_class(data.labels.size());
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto idx = data.index_of(data.records[i].label);
        if (!idx) throw GmmError(GmmError::Kind::unknown_label, "record label is not declared");
        by_class[*idx].push_back(i);
    }

    std::vector<bool> in_train(data.records.size(), false);
    Rng rng = make_rng(rng_seed);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.size() < 2) {
            throw GmmError(GmmError::Kind::insufficient_samples,
                           "class '" + data.labels[c] + "' needs at least 2 samples to split");
        }
        shuffle(members.begin(), members.end(), rng);
        const double wanted = std::round(train_fraction * static_cast<double>(members.size()));
        const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(wanted), 1, members.size() - 1);
        for (std::size_t i = 0; i < keep; ++i) in_train[members[i]] = true;
    }

    LabeledDataset train_set{data.labels, {}};
    LabeledDataset test_set{data.labels, {}};
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        (in_train[i] ? train_set : test_set).records.push_back(data.records[i]);
    }
    return {std::move(train_set), std::move(test_set)};
}

std::string save_model(const GmmClassifier& classifier) {
    json classes = json::array();
    for (std::size_t i = 0; i < classifier.classes.size(); ++i) {
        const auto& cls = classifier.classes[i];
        json comps = json::array();
        for (const auto& c : cls.components) {
            json cov;
            if (c.kind() == CovarianceKind::diagonal) {
                cov = vector_to_json(c.variances());
            } else {
                const MatrixXd m = c.covariance();
                cov = json::array();
                for (Eigen::Index r = 0; r < m.rows(); ++r) cov.push_back(vector_to_json(m.row(r).transpose()));
            }
            comps.push_back({{"weight", c.weight()}, {"mean", vector_to_json(c.mean())}, {"covariance", cov}});
        }
        classes.push_back({{"label", cls.label}, {"prior", classifier.priors.at(i)}, {"components", comps}});
    }
    const auto& ref = classifier.reference;
    json doc = {
        {"format", "rhyme_mimic.gmm"},
        {"version", model_format_version},
        {"feature_dim", classifier.feature_dim},
        {"reference_indices", {ref.a1, ref.a2, ref.b1, ref.b2}},
        {"covariance_kind", to_string(classifier.covariance_kind)},
        {"rejection_log_density", classifier.rejection_log_density ? json(*classifier.rejection_log_density) : json()},
        {"classes", classes},
    };
    return doc.dump(2) + "\n";
}

GmmClassifier load_model(std::string_view bytes) {
    const json doc = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) corrupt("not a parseable document");
    const auto version = doc.find("version");
    if (version == doc.end() || !version->is_number_integer()) corrupt("missing version");
    if (version->get<int>() != model_format_version) {
        throw GmmError(GmmError::Kind::version_mismatch,
                       "model version " + std::to_string(version->get<int>()) + " unsupported (expected " +
                           std::to_string(model_format_version) + ")");
    }

    try {
        GmmClassifier out;
        out.feature_dim = doc.at("feature_dim").get<std::size_t>();
        const auto& ref = doc.at("reference_indices");
        if (!ref.is_array() || ref.size() != 4) corrupt("reference_indices must hold 4 entries");
        out.reference = {ref[0].get<int>(), ref[1].get<int>(), ref[2].get<int>(), ref[3].get<int>()};
        out.reference.validate();
        out.covariance_kind = parse_covariance_kind(doc.at("covariance_kind").get<std::string>());
        const auto& rej = doc.at("rejection_log_density");
        if (!rej.is_null()) out.rejection_log_density = rej.get<double>();

        const auto& classes = doc.at("classes");
        if (!classes.is_array() || classes.empty()) corrupt("no classes");
        for (const auto& cls : classes) {
            ClassModel model;
            model.label = cls.at("label").get<std::string>();
            const auto& comps = cls.at("components");
            if (!comps.is_array() || comps.empty()) corrupt("class without components");
            for (const auto& c : comps) {
                const double weight = c.at("weight").get<double>();
                VectorXd mean = vector_from_json(c.at("mean"), out.feature_dim);
                const auto& cov = c.at("covariance");
                if (out.covariance_kind == CovarianceKind::diagonal) {
                    model.components.push_back(
                        GaussianComponent::diagonal(weight, std::move(mean), vector_from_json(cov, out.feature_dim)));
                } else {
                    if (!cov.is_array() || cov.size() != out.feature_dim) corrupt("covariance has wrong row count");
                    MatrixXd m(static_cast<Eigen::Index>(out.feature_dim), static_cast<Eigen::Index>(out.feature_dim));
                    for (std::size_t r = 0; r < out.feature_dim; ++r) {
                        m.row(static_cast<Eigen::Index>(r)) = vector_from_json(cov[r], out.feature_dim).transpose();
                    }
                    model.components.push_back(GaussianComponent::full(weight, std::move(mean), std::move(m)));
                }
            }
            double weight_sum = 0.0;
            for (const auto& c : model.components) {
                if (!(c.weight() > 0.0)) corrupt("component weights must be positive");
                weight_sum += c.weight();
            }
            if (std::abs(weight_sum - 1.0) > 1e-6) corrupt("component weights of '" + model.label + "' do not sum to 1");
            out.priors.push_back(cls.at("prior").get<double>());
            if (!(out.priors.back() > 0.0)) corrupt("class priors must be positive");
            out.classes.push_back(std::move(model));
        }
        double prior_sum = 0.0;
        for (double p : out.priors) prior_sum += p;
        if (std::abs(prior_sum - 1.0) > 1e-6) corrupt("class priors do not sum to 1");
        return out;
    } catch (const GmmError&) {
        throw;
    } catch (const std::exception& e) {
        corrupt(e.what());
    }
}

void save_model_file(const GmmClassifier& classifier, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file " + path);
    out << save_model(classifier);
    if (!out) throw std::runtime_error("failed writing model file " + path);
}

GmmClassifier load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model(buf.str());
}

}  // namespace rhyme_mimic
