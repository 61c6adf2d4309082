#pragma once

#include <optional>
#include <string>

#include "canonical.hpp"
#include "config.hpp"

namespace pws {

struct LabelRunResult {
    std::string probs_csv_path;
    std::string votes_csv_path;
    std::string manifest_path;
    Json manifest;
};

// The full labeling pipeline: load dataset, apply templates, execute queries
// (cached), calibrate voters where requested, build the vote matrix, run the
// label model, write probs.csv / votes.csv / manifest.json under out_dir.
// Stage failures carry the stage name (and row index where applicable).
LabelRunResult run_label_pipeline(const std::string& config_path, const std::string& out_dir,
                                  const std::string& cache_path = "");

struct EvalReport {
    double top1_accuracy = 0.0;
    std::size_t n_rows = 0;
    std::vector<std::size_t> predicted_per_class;  // by class index
    std::vector<std::size_t> gold_per_class;
    std::vector<std::string> class_names;
    // present when a votes file is supplied
    std::optional<double> row_coverage;            // rows with >= 1 vote
    std::optional<std::vector<double>> lf_coverage;
    std::optional<std::vector<std::string>> lf_names;

    Json to_json() const;
    std::string to_text() const;
};

// Top-1 accuracy of probs.csv against a gold CSV (column "label" holding a
// class name or 1-based index); argmax ties break toward the lowest class.
EvalReport evaluate(const std::string& probs_csv_path, const std::string& gold_csv_path,
                    const std::string& votes_csv_path = "");

}  // namespace pws
