#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>

#include "error.hpp"
#include "http_backend.hpp"
#include "transport.hpp"

namespace pws {

namespace {

class ConfigReader {
public:
    explicit ConfigReader(std::string path) : path_(std::move(path)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
        std::string where = path_;
        if (node.IsDefined() && node.Mark().line >= 0)
            where += ":" + std::to_string(node.Mark().line + 1);
        throw Error(ErrorCode::Config, where + ": " + message);
    }

    YAML::Node require(const YAML::Node& parent, const std::string& key) const {
        if (!parent.IsMap()) fail(parent, "expected a mapping with key \"" + key + "\"");
        YAML::Node child = parent[key];
        if (!child.IsDefined()) fail(parent, "missing required key \"" + key + "\"");
        return child;
    }

    template <typename T>
    T scalar(const YAML::Node& node, const std::string& what) const {
        if (!node.IsScalar()) fail(node, what + " must be a scalar");
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(node, what + " has the wrong type");
        }
    }

    std::vector<std::string> string_list(const YAML::Node& node, const std::string& what) const {
        if (!node.IsSequence()) fail(node, what + " must be a list");
        std::vector<std::string> out;
        for (const auto& item : node) out.push_back(scalar<std::string>(item, what + " entry"));
        return out;
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

int resolve_class(const ConfigReader& reader, const YAML::Node& node,
                  const std::vector<std::string>& label_space) {
    const std::string text = reader.scalar<std::string>(node, "label map target");
    auto it = std::find(label_space.begin(), label_space.end(), text);
    if (it != label_space.end()) return static_cast<int>(it - label_space.begin()) + 1;
    try {
        std::size_t used = 0;
        const int id = std::stoi(text, &used);
        if (used == text.size() && id >= 1 && id <= static_cast<int>(label_space.size())) return id;
    } catch (const std::exception&) {
    }
    reader.fail(node, "label \"" + text + "\" is not in label_space");
}

Vote parse_label_target(const ConfigReader& reader, const YAML::Node& node,
                        const std::vector<std::string>& label_space) {
    if (node.IsSequence()) {
        std::vector<int> classes;
        for (const auto& item : node) classes.push_back(resolve_class(reader, item, label_space));
        if (classes.empty()) reader.fail(node, "label set must be nonempty");
        return Vote(classes);
    }
    return Vote(resolve_class(reader, node, label_space));
}

DatasetConfig parse_dataset(const ConfigReader& reader, const YAML::Node& node) {
    DatasetConfig out;
    out.path = reader.scalar<std::string>(reader.require(node, "path"), "dataset.path");
    if (node["format"]) {
        const auto fmt = reader.scalar<std::string>(node["format"], "dataset.format");
        if (fmt == "csv") out.format = DatasetConfig::Format::csv;
        else if (fmt == "json") out.format = DatasetConfig::Format::json;
        else reader.fail(node["format"], "dataset.format must be csv or json");
    }
    if (node["image_column"])
        out.image_column = reader.scalar<std::string>(node["image_column"], "dataset.image_column");
    if (node["type_hints"]) {
        const YAML::Node hints = node["type_hints"];
        if (!hints.IsMap()) reader.fail(hints, "dataset.type_hints must be a mapping");
        for (const auto& kv : hints) {
            const auto name = kv.first.as<std::string>();
            const auto kind = reader.scalar<std::string>(kv.second, "type hint");
            try {
                out.type_hints[name] = column_kind_from_name(kind);
            } catch (const Error& e) {
                reader.fail(kv.second, e.what());
            }
        }
    }
    if (out.image_column && !out.type_hints.count(*out.image_column))
        out.type_hints[*out.image_column] = ColumnKind::image_ref;
    return out;
}

BackendConfig parse_backend(const ConfigReader& reader, const YAML::Node& node) {
    BackendConfig out;
    const auto kind = reader.scalar<std::string>(reader.require(node, "kind"), "backend.kind");
    if (kind == "mock") out.kind = BackendConfig::Kind::mock;
    else if (kind == "mock_encoder") out.kind = BackendConfig::Kind::mock_encoder;
    else if (kind == "http") out.kind = BackendConfig::Kind::http;
    else if (kind == "remote") out.kind = BackendConfig::Kind::remote;
    else reader.fail(node["kind"], "backend.kind must be mock, mock_encoder, http or remote");

    if (node["model_id"])
        out.model_id = reader.scalar<std::string>(node["model_id"], "backend.model_id");
    if (node["endpoint"])
        out.endpoint = reader.scalar<std::string>(node["endpoint"], "backend.endpoint");
    if (node["api_key"]) out.api_key = reader.scalar<std::string>(node["api_key"], "backend.api_key");
    if (node["lexicon"]) out.lexicon = reader.string_list(node["lexicon"], "backend.lexicon");

    if ((out.kind == BackendConfig::Kind::http || out.kind == BackendConfig::Kind::remote) &&
        out.endpoint.empty())
        reader.fail(node, "backend.endpoint is required for " + kind + " backends");
    return out;
}

TemplateRecord parse_template(const ConfigReader& reader, const YAML::Node& node,
                              std::size_t index, const std::optional<std::string>& image_column) {
    TemplateRecord out;
    out.name = node["name"] ? reader.scalar<std::string>(node["name"], "template.name")
                            : "t" + std::to_string(index);
    const auto text = reader.scalar<std::string>(reader.require(node, "template"), "template text");

    std::optional<std::vector<std::string>> choices;
    if (node["answer_choices"])
        choices = reader.string_list(node["answer_choices"], "answer_choices");

    try {
        if (node["slots"]) {
            const YAML::Node slots_node = node["slots"];
            if (!slots_node.IsMap()) reader.fail(slots_node, "slots must be a mapping");
            std::vector<std::pair<std::string, std::vector<std::string>>> slots;
            for (const auto& kv : slots_node)
                slots.emplace_back(kv.first.as<std::string>(),
                                   reader.string_list(kv.second, "slot values"));
            if (choices) reader.fail(node, "a template takes either slots or answer_choices");
            out.tmpl = ImageTemplate(std::move(slots), text,
                                     image_column.value_or("image"));
        } else {
            out.tmpl = StringTemplate(text, std::move(choices));
        }
    } catch (const Error& e) {
        reader.fail(node, e.what());
    }
    return out;
}

LabelModelConfig parse_label_model(const ConfigReader& reader, const YAML::Node& node) {
    LabelModelConfig out;
    const auto kind = reader.scalar<std::string>(reader.require(node, "kind"), "label_model.kind");
    if (kind == "majority") out.kind = LabelModelConfig::Kind::majority;
    else if (kind == "naive_bayes") out.kind = LabelModelConfig::Kind::naive_bayes;
    else if (kind == "triplet") out.kind = LabelModelConfig::Kind::triplet;
    else if (kind == "partial") out.kind = LabelModelConfig::Kind::partial;
    else reader.fail(node["kind"], "label_model.kind must be majority, naive_bayes, triplet or partial");

    if (node["max_iters"])
        out.em.max_iters = reader.scalar<std::size_t>(node["max_iters"], "label_model.max_iters");
    if (node["tol"]) out.em.tol = reader.scalar<double>(node["tol"], "label_model.tol");
    if (node["class_balance"]) {
        out.class_balance =
            reader.scalar<double>(node["class_balance"], "label_model.class_balance");
        if (!(out.class_balance > 0.0 && out.class_balance < 1.0))
            reader.fail(node["class_balance"], "class_balance must be in (0,1)");
    }
    return out;
}

}  // namespace

TaskConfig load_task_config(const std::string& path) {
    ConfigReader reader(path);
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw Error(ErrorCode::Config, "cannot open config file: " + path);
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorCode::Config,
                    path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) throw Error(ErrorCode::Config, path + ": config must be a mapping");

    TaskConfig out;
    if (root["seed"]) out.seed = reader.scalar<std::uint64_t>(root["seed"], "seed");

    out.dataset = parse_dataset(reader, reader.require(root, "dataset"));
    out.backend = parse_backend(reader, reader.require(root, "backend"));

    out.label_space = reader.string_list(reader.require(root, "label_space"), "label_space");
    if (out.label_space.empty()) reader.fail(root["label_space"], "label_space must be nonempty");
    for (std::size_t i = 0; i < out.label_space.size(); ++i)
        for (std::size_t j = i + 1; j < out.label_space.size(); ++j)
            if (out.label_space[i] == out.label_space[j])
                reader.fail(root["label_space"], "duplicate class name: " + out.label_space[i]);

    const YAML::Node templates = reader.require(root, "templates");
    if (!templates.IsSequence() || templates.size() == 0)
        reader.fail(templates, "templates must be a nonempty list");
    for (std::size_t i = 0; i < templates.size(); ++i)
        out.templates.push_back(
            parse_template(reader, templates[i], i, out.dataset.image_column));

    const YAML::Node voters = reader.require(root, "voters");
    if (!voters.IsSequence() || voters.size() == 0)
        reader.fail(voters, "voters must be a nonempty list");
    const int k = static_cast<int>(out.label_space.size());
    for (std::size_t i = 0; i < voters.size(); ++i) {
        const YAML::Node vn = voters[i];
        VoterRecord rec;
        rec.template_index =
            reader.scalar<std::size_t>(reader.require(vn, "template_index"), "template_index");
        if (rec.template_index >= out.templates.size())
            reader.fail(vn["template_index"],
                        "template_index " + std::to_string(rec.template_index) +
                            " out of range (have " + std::to_string(out.templates.size()) +
                            " templates)");
        rec.name = vn["name"] ? reader.scalar<std::string>(vn["name"], "voter.name")
                              : out.templates[rec.template_index].name;
        const YAML::Node map_node = reader.require(vn, "label_map");
        if (!map_node.IsMap()) reader.fail(map_node, "label_map must be a mapping");
        for (const auto& kv : map_node)
            rec.label_map.entries.emplace_back(
                kv.first.as<std::string>(), parse_label_target(reader, kv.second, out.label_space));
        if (rec.label_map.entries.empty()) reader.fail(map_node, "label_map must be nonempty");
        try {
            rec.label_map.check_within(k);
        } catch (const Error& e) {
            reader.fail(map_node, e.what());
        }
        if (vn["matcher"]) {
            rec.matcher = reader.scalar<std::string>(vn["matcher"], "matcher");
            try {
                matcher_by_name(rec.matcher);
            } catch (const Error& e) {
                reader.fail(vn["matcher"], e.what());
            }
        }
        if (vn["calibrate"]) rec.calibrate = reader.scalar<bool>(vn["calibrate"], "calibrate");
        out.voters.push_back(std::move(rec));
    }
    // de-duplicate voter names for the votes.csv header
    for (std::size_t i = 0; i < out.voters.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (out.voters[j].name == out.voters[i].name)
                out.voters[i].name += "_" + std::to_string(i);

    out.label_model = parse_label_model(reader, reader.require(root, "label_model"));
    if (out.label_model.kind == LabelModelConfig::Kind::triplet && out.label_space.size() != 2)
        reader.fail(root["label_model"], "the triplet label model requires exactly 2 classes");

    if (root["batching"]) {
        const YAML::Node b = root["batching"];
        if (b["token_budget"])
            out.batching.token_budget =
                reader.scalar<std::size_t>(b["token_budget"], "batching.token_budget");
        if (b["max_batch"])
            out.batching.max_batch = reader.scalar<std::size_t>(b["max_batch"], "batching.max_batch");
        if (b["workers"])
            out.batching.workers = reader.scalar<std::size_t>(b["workers"], "batching.workers");
        if (out.batching.token_budget < 1) reader.fail(b, "token_budget must be >= 1");
        if (out.batching.max_batch < 1) reader.fail(b, "max_batch must be >= 1");
    }
    return out;
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
    switch (config.kind) {
        case BackendConfig::Kind::mock:
            return std::make_shared<MockBackend>(config.model_id, Capabilities{true, true, true},
                                                 config.lexicon);
        case BackendConfig::Kind::mock_encoder:
            return std::make_shared<MockEncoderBackend>(config.model_id);
        case BackendConfig::Kind::http: {
            HttpEndpoint endpoint;
            endpoint.url = config.endpoint;
            endpoint.model = config.model_id;
            endpoint.api_key = config.api_key;
            return std::make_shared<HttpBackend>(endpoint);
        }
        case BackendConfig::Kind::remote: {
            auto [host, port] = parse_endpoint(config.endpoint);
            return std::make_shared<RemoteBackend>(host, port);
        }
    }
    throw Error(ErrorCode::Internal, "unreachable backend kind");
}

}  // namespace pws
