#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnshort/dataset.hpp"

namespace attnshort {

struct SyntheticSpec {
    int num_records = 2000;
    int vocab_size = 200;  // total word types, keywords included
    int num_classes = 2;
    int keywords_per_class = 3;
    int noise_len = 40;
    int sentences_per_record = 1;  // > 1 chunks each record into '.'-ended sentences
    uint64_t seed = 1;
};

/// Labeled corpus where every class-c record is noise_len uniform noise words
/// plus all of class c's keywords planted at random positions. The planted
/// keywords per record give ground truth for filter-recall metrics.
struct SyntheticData {
    LabeledDataset data;
    std::vector<std::vector<std::string>> planted;  // aligned with data.records
    std::vector<std::string> keywords;              // all keyword types, class-major
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

/// Mean over records of (planted keywords still present) / (planted count).
/// Records must be index-aligned with the planted lists.
double keyword_recall(const std::vector<Record>& records,
                      const std::vector<std::vector<std::string>>& planted);

/// Baseline: keep k = max(1, round(p*m)) uniformly random word positions per
/// record and measure the same recall.
double random_selection_recall(const SyntheticData& sd, double keep_fraction, uint64_t seed);

}  // namespace attnshort
