#pragma once

#include <optional>
#include <string>
#include <vector>

namespace attnshort {

struct Record {
    std::string text;
    std::optional<std::string> text2;  // second member of a text-pair record
    int label = 0;
};

struct LabeledDataset {
    std::vector<Record> records;
    int num_classes = 2;

    size_t size() const { return records.size(); }
};

/// JSON-lines: {"text": str, "text2"?: str, "label": int >= 0}. num_classes
/// defaults to 1 + max label (floored at 2) unless overridden. Malformed
/// lines and negative labels raise errors naming the line number.
LabeledDataset load_dataset(const std::string& path, int num_classes_override = 0);

/// Writes the same JSON-lines format load_dataset reads.
void save_dataset(const LabeledDataset& ds, const std::string& path);

/// Model-facing text of a record: pair records are concatenated as
/// "text1 <fsep> text2" so the field separator tokenizes to its reserved id.
std::string record_model_text(const Record& r);

/// Deterministic prefix/suffix split; both halves stay non-empty.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data,
                                                        double eval_fraction);

}  // namespace attnshort
