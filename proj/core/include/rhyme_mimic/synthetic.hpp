#ifndef RHYME_MIMIC_SYNTHETIC_HPP
#define RHYME_MIMIC_SYNTHETIC_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rhyme_mimic/game_engine.hpp"
#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/peripherals.hpp"
#include "rhyme_mimic/rng.hpp"
#include "rhyme_mimic/skeleton.hpp"

namespace rhyme_mimic {

// Substitute for a recorded pose dataset: eight rhyme gestures as coco-18
// skeletons in 640x480 pixel space. Samples jitter every joint by a Gaussian
// of `spread` pixels and place the child at a random position and size, so
// classes form clusters in normalized-feature space whose overlap grows with
// spread.

struct AnchorPose {
    std::string label;
    std::array<Point2, 18> joints{};
};

/// The eight gestures, in class order.
const std::vector<AnchorPose>& rhyme_anchor_poses();

struct SkeletonSampleOptions {
    double spread_px = 0.0;
    bool random_placement = true;  // translate and rescale the whole body
    double min_confidence = 0.6;
    double max_confidence = 0.95;
};

SkeletonFrame sample_skeleton(const AnchorPose& anchor, const SkeletonSampleOptions& options, Rng& rng);

struct SyntheticDatasetConfig {
    std::size_t classes = 8;
    std::size_t per_class = 30;
    double spread_px = 4.0;
    std::uint64_t seed = 1;
    ReferenceJoints reference{};
};

/// Features dataset with a fixed label order (anchor order).
LabeledDataset generate_dataset(const SyntheticDatasetConfig& config);

/// Same draws as generate_dataset, but kept as raw frames.
std::vector<std::pair<std::string, SkeletonFrame>> generate_raw_samples(const SyntheticDatasetConfig& config);

struct SessionStreamConfig {
    /// Per script line: does the child hold the target pose while the robot waits?
    std::vector<bool> imitated;
    double spread_px = 2.0;
    std::uint64_t seed = 7;
    std::int64_t frame_period_ms = default_frame_period_ms;
    /// Pose shown from this long before the predicted wait start...
    std::int64_t hold_lead_ms = 1000;
    /// ...until this long after it.
    std::int64_t hold_tail_ms = 2000;
    /// Fraction of frames that also contain a smaller bystander.
    double bystander_rate = 0.2;
};

struct SessionStream {
    std::vector<StreamFrame> frames;
    std::vector<bool> imitated;
    std::vector<std::int64_t> predicted_wait_start_ms;
};

/// Builds a camera stream for `script` whose ground truth is `config.imitated`.
/// Wait windows are predicted from the latency model (session starting at
/// stream time 0); lines not imitated show a different gesture instead.
SessionStream generate_session_stream(const RhymeScript& script, const LatencyModel& latency,
                                      const SessionStreamConfig& config);

/// Eight-line script, one line per anchor gesture.
RhymeScript default_rhyme_script();

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_SYNTHETIC_HPP
