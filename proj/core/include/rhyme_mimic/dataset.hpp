#ifndef RHYME_MIMIC_DATASET_HPP
#define RHYME_MIMIC_DATASET_HPP

#include <istream>
#include <ostream>
#include <string>

#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/skeleton.hpp"

namespace rhyme_mimic {

// Newline-delimited records. Each line is one of
//   {"labels": [...]}                          optional header fixing class order
//   {"label": L, "features": [16 reals]}        pre-normalized
//   {"label": L, "joints": [[x, y, c] x 18|25]} raw, normalized at load

struct DatasetLoadOptions {
    ConfidenceThreshold threshold{};
    ReferenceJoints reference{};
};

struct DatasetLoadResult {
    LabeledDataset dataset;
    std::size_t skipped_rejected = 0;    // raw record below the confidence threshold
    std::size_t skipped_degenerate = 0;  // raw record with a degenerate reference geometry
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

DatasetLoadResult read_dataset(std::istream& in, const DatasetLoadOptions& options = {});
DatasetLoadResult read_dataset_file(const std::string& path, const DatasetLoadOptions& options = {});

/// Writes the header line plus one features record per sample.
void write_dataset(std::ostream& out, const LabeledDataset& data);
void write_dataset_file(const std::string& path, const LabeledDataset& data);

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_DATASET_HPP
