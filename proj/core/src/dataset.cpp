#include "attnshort/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace attnshort {

using nlohmann::json;

LabeledDataset load_dataset(const std::string& path, int num_classes_override) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);

    LabeledDataset ds;
    int max_label = 0;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(line_no);

        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error("load_dataset: malformed JSON at " + where);
        if (!j.contains("text") || !j["text"].is_string())
            throw std::runtime_error("load_dataset: missing or non-string \"text\" at " + where);
        if (!j.contains("label") || !j["label"].is_number_integer())
            throw std::runtime_error("load_dataset: missing or non-integer \"label\" at " + where);

        Record r;
        r.text = j["text"].get<std::string>();
        r.label = j["label"].get<int>();
        if (r.label < 0)
            throw std::runtime_error("load_dataset: negative label at " + where);
        if (j.contains("text2") && !j["text2"].is_null()) {
            if (!j["text2"].is_string())
                throw std::runtime_error("load_dataset: non-string \"text2\" at " + where);
            r.text2 = j["text2"].get<std::string>();
        }
        max_label = std::max(max_label, r.label);
        ds.records.push_back(std::move(r));
    }

    ds.num_classes = num_classes_override > 0 ? num_classes_override : std::max(2, max_label + 1);
    for (const Record& r : ds.records)
        if (r.label >= ds.num_classes)
            throw std::runtime_error("load_dataset: label out of range for num_classes");
    return ds;
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    for (const Record& r : ds.records) {
        json j;
        j["text"] = r.text;
        if (r.text2) j["text2"] = *r.text2;
        j["label"] = r.label;
        out << j.dump() << '\n';
    }
}

std::string record_model_text(const Record& r) {
    if (!r.text2) return r.text;
    return r.text + " <fsep> " + *r.text2;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data,
                                                        double eval_fraction) {
    const size_t n = data.records.size();
    if (n < 2) throw std::invalid_argument("split_dataset: need at least 2 records");
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
        throw std::invalid_argument("split_dataset: eval_fraction must be in (0, 1)");
    size_t n_eval = static_cast<size_t>(std::llround(eval_fraction * static_cast<double>(n)));
    n_eval = std::min(std::max(n_eval, size_t{1}), n - 1);

    LabeledDataset train, eval;
    train.num_classes = eval.num_classes = data.num_classes;
    train.records.assign(data.records.begin(), data.records.end() - static_cast<long>(n_eval));
    eval.records.assign(data.records.end() - static_cast<long>(n_eval), data.records.end());
    return {std::move(train), std::move(eval)};
}

}  // namespace attnshort
