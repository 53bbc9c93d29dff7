#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnshort/attn_filter.hpp"
#include "attnshort/dataset.hpp"
#include "attnshort/encoder.hpp"
#include "attnshort/synthetic.hpp"

namespace attnshort {

struct CurvePoint {
    double x = 0.0;  // layer index or keep fraction
    double accuracy = 0.0;
    int n_eval = 0;
    uint64_t seed = 0;
};

/// CSV `x,accuracy,n_eval,seed`, rows sorted by (x, seed). Errors on an
/// empty point list.
void emit_curves(const std::vector<CurvePoint>& points, const std::string& path);

struct ExperimentConfig {
    std::string dataset_path;  // empty: generate synthetic data per seed
    SyntheticSpec synth;
    double eval_fraction = 0.25;
    int max_vocab = 50000;

    EncoderConfig encoder;  // vocab_size filled per run from the actual vocab
    TrainConfig train;

    FilterSpec filter;                 // layer + keep fraction for filtering recipes
    std::vector<double> fractions;     // reduction-curve x values
    std::vector<uint64_t> seeds{1, 2, 3};
};

/// Train once per seed on full-length data, then filter the eval split at
/// every layer and score the same classifier on each filtered set. One
/// CurvePoint per (layer, seed); x is the layer index.
std::vector<CurvePoint> run_layer_sweep(const ExperimentConfig& cfg);

struct TopBottomResult {
    uint64_t seed = 0;
    double full = 0.0, top = 0.0, bottom = 0.0;  // full-length-test accuracies
    int n_eval = 0;
};

/// Per seed: train a full-length classifier, filter the training data top-p
/// and bottom-p with it, fine-tune fresh classifiers on each, and evaluate
/// all three on the untouched full-length eval split.
std::vector<TopBottomResult> run_top_bottom(const ExperimentConfig& cfg);

struct ReductionCurves {
    std::vector<CurvePoint> attention;   // x = keep fraction
    std::vector<CurvePoint> similarity;  // x = keep fraction (1 - target reduction)
};

/// Per (fraction, seed): shorten the training data by attention filtering and
/// by sentence-similarity elimination, train on each, evaluate on the
/// full-length eval split.
ReductionCurves run_reduction_curve(const ExperimentConfig& cfg);

/// Vocabulary over every record's model-facing text.
Vocab dataset_vocab(const LabeledDataset& data, int max_size,
                    const std::vector<std::string>& extra_specials = {});

uint64_t fnv1a64(const std::string& s);

}  // namespace attnshort
