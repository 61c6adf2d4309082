#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "backend.hpp"
#include "batching.hpp"
#include "dataset.hpp"
#include "labelmodel.hpp"
#include "templates.hpp"
#include "voter.hpp"

namespace pws {

struct BackendConfig {
    enum class Kind { mock, mock_encoder, http, remote };
    Kind kind = Kind::mock;
    std::string model_id = "mock-1";
    std::string endpoint;              // http: URL; remote: host:port
    std::string api_key;               // http only
    std::vector<std::string> lexicon;  // mock completions
};

struct TemplateRecord {
    std::string name;
    Template tmpl;
};

struct VoterRecord {
    std::string name;
    std::size_t template_index = 0;
    LabelMap label_map;
    std::string matcher = "exact";
    bool calibrate = false;
};

struct LabelModelConfig {
    enum class Kind { majority, naive_bayes, triplet, partial };
    Kind kind = Kind::naive_bayes;
    EmOptions em;
    double class_balance = 0.5;  // triplet only
};

struct DatasetConfig {
    std::string path;
    enum class Format { csv, json } format = Format::csv;
    std::optional<std::string> image_column;
    std::map<std::string, ColumnKind> type_hints;
};

// One task file drives the whole labeling pipeline: dataset in, templates to
// queries, responses to votes, votes to probabilistic labels.
struct TaskConfig {
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    BackendConfig backend;
    std::vector<std::string> label_space;
    std::vector<TemplateRecord> templates;
    std::vector<VoterRecord> voters;
    LabelModelConfig label_model;
    BatchOptions batching;
};

// Parses and validates; schema violations report the offending line.
TaskConfig load_task_config(const std::string& path);

std::shared_ptr<Backend> make_backend(const BackendConfig& config);

}  // namespace pws
