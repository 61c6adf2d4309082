#include "pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "client.hpp"
#include "error.hpp"
#include "labelmodel.hpp"
#include "sha256.hpp"
#include "voter.hpp"

namespace pws {

namespace {

[[noreturn]] void stage_fail(const std::string& stage, const Error& e) {
    throw Error(e.code(), "stage " + stage + ": " + e.what());
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        stage_fail(name, e);
    }
}

Dataset load_dataset(const DatasetConfig& cfg) {
    if (cfg.format == DatasetConfig::Format::json) return load_json(cfg.path);
    return load_csv(cfg.path, cfg.type_hints);
}

}  // namespace

LabelRunResult run_label_pipeline(const std::string& config_path, const std::string& out_dir,
                                  const std::string& cache_path) {
    const TaskConfig config = load_task_config(config_path);
    const int k = static_cast<int>(config.label_space.size());

    std::filesystem::create_directories(out_dir);

    const Dataset data = stage("load_dataset", [&] { return load_dataset(config.dataset); });

    auto backend = stage("backend", [&] { return make_backend(config.backend); });
    std::shared_ptr<ResponseCache> cache;
    if (!cache_path.empty()) cache = std::make_shared<ResponseCache>(cache_path);
    ClientOptions client_options;
    client_options.batching = config.batching;
    Client client(backend, cache, client_options);

    // queries per template (voters may share templates)
    std::vector<std::vector<Query>> queries_per_template(config.templates.size());
    for (std::size_t t = 0; t < config.templates.size(); ++t) {
        const auto& record = config.templates[t];
        queries_per_template[t] = stage("apply_templates", [&] {
            try {
                return apply_to_dataset(record.tmpl, data);
            } catch (const Error& e) {
                throw Error(e.code(), "template " + record.name + ": " + e.what());
            }
        });
    }

    std::vector<std::vector<Response>> responses_per_template(config.templates.size());
    for (std::size_t t = 0; t < config.templates.size(); ++t) {
        responses_per_template[t] = stage("run_queries", [&] {
            return client.run(queries_per_template[t]);
        });
    }

    // voters, calibrated where requested
    std::vector<Voter> voters;
    voters.reserve(config.voters.size());
    for (const VoterRecord& record : config.voters) {
        Voter voter{record.label_map, matcher_by_name(record.matcher), std::nullopt};
        if (record.calibrate) {
            const Template& tmpl = config.templates[record.template_index].tmpl;
            const auto* st = std::get_if<StringTemplate>(&tmpl);
            if (!st)
                throw Error(ErrorCode::Config,
                            "stage calibrate: voter " + record.name +
                                ": calibration applies to string templates only");
            voter = stage("calibrate", [&] { return calibrate(client, *st, voter); });
        }
        voters.push_back(std::move(voter));
    }

    std::vector<std::vector<Response>> responses_per_voter;
    responses_per_voter.reserve(config.voters.size());
    for (const VoterRecord& record : config.voters)
        responses_per_voter.push_back(responses_per_template[record.template_index]);

    const VoteMatrix votes = stage("vote", [&] {
        VoteMatrix v = build_vote_matrix(voters, responses_per_voter);
        v.check_within(k);
        return v;
    });

    const ProbLabels probs = stage("label_model", [&]() -> ProbLabels {
        switch (config.label_model.kind) {
            case LabelModelConfig::Kind::majority:
                return majority_vote(votes, k);
            case LabelModelConfig::Kind::naive_bayes: {
                NBParams params = naive_bayes_fit(votes, k, config.label_model.em);
                return naive_bayes_predict(votes, params);
            }
            case LabelModelConfig::Kind::triplet: {
                const SignedVotes signed_votes = to_signed_votes(votes);
                TripletParams params = triplet_fit(signed_votes, config.label_model.class_balance);
                return triplet_predict(signed_votes, params);
            }
            case LabelModelConfig::Kind::partial:
                return partial_label_fit_predict(votes, k, config.label_model.em);
        }
        throw Error(ErrorCode::Internal, "unreachable label model kind");
    });

    LabelRunResult result;
    result.probs_csv_path = (std::filesystem::path(out_dir) / "probs.csv").string();
    result.votes_csv_path = (std::filesystem::path(out_dir) / "votes.csv").string();
    result.manifest_path = (std::filesystem::path(out_dir) / "manifest.json").string();

    stage("write_outputs", [&] {
        {
            std::ofstream out(result.probs_csv_path, std::ios::binary);
            if (!out) throw Error(ErrorCode::Io, "cannot write " + result.probs_csv_path);
            probs.write_csv(out, config.label_space);
        }
        {
            std::ofstream out(result.votes_csv_path, std::ios::binary);
            if (!out) throw Error(ErrorCode::Io, "cannot write " + result.votes_csv_path);
            out << "id";
            for (const VoterRecord& record : config.voters) out << ",lf_" << record.name;
            out << "\n";
            for (std::size_t i = 0; i < votes.n_rows(); ++i) {
                out << i;
                for (std::size_t j = 0; j < votes.n_cols(); ++j)
                    out << "," << votes.at(i, j).render();
                out << "\n";
            }
        }
        return 0;
    });

    const ClientStats stats = client.stats();
    Json manifest;
    manifest["config_digest"] = sha256_file(config_path).hex();
    manifest["model_id"] = client.model_id();
    manifest["seed"] = config.seed;
    manifest["n_rows"] = data.n_rows();
    manifest["n_lfs"] = config.voters.size();
    manifest["cache_hits"] = stats.cache_hits;
    manifest["cache_misses"] = stats.cache_misses;
    manifest["cache_hit_rate"] = stats.hit_rate();
    manifest["backend_calls"] = stats.backend_queries;
    manifest["outputs"] = Json{{"probs", result.probs_csv_path},
                               {"votes", result.votes_csv_path}};

    stage("write_outputs", [&] {
        std::ofstream out(result.manifest_path, std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + result.manifest_path);
        out << canonical_dump(manifest) << "\n";
        return 0;
    });
    result.manifest = std::move(manifest);
    return result;
}

namespace {

std::vector<std::string> class_names_from_probs_header(const Dataset& probs) {
    std::vector<std::string> names;
    for (const std::string& col : probs.column_names()) {
        if (col == "id") continue;
        if (col.rfind("p_", 0) != 0)
            throw Error(ErrorCode::Parse, "unexpected probs column: " + col);
        names.push_back(col.substr(2));
    }
    if (names.empty()) throw Error(ErrorCode::Parse, "probs file has no p_<class> columns");
    return names;
}

}  // namespace

Json EvalReport::to_json() const {
    Json j;
    j["top1_accuracy"] = top1_accuracy;
    j["n_rows"] = n_rows;
    Json pred, gold;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        pred[class_names[c]] = predicted_per_class[c];
        gold[class_names[c]] = gold_per_class[c];
    }
    j["predicted_per_class"] = std::move(pred);
    j["gold_per_class"] = std::move(gold);
    if (row_coverage) j["row_coverage"] = *row_coverage;
    if (lf_coverage && lf_names) {
        Json cov;
        for (std::size_t c = 0; c < lf_names->size(); ++c) cov[(*lf_names)[c]] = (*lf_coverage)[c];
        j["lf_coverage"] = std::move(cov);
    }
    return j;
}

std::string EvalReport::to_text() const {
    std::ostringstream out;
    out << "top-1 accuracy: " << top1_accuracy << " (" << n_rows << " rows)\n";
    out << "per-class counts (predicted/gold):\n";
    for (std::size_t c = 0; c < class_names.size(); ++c)
        out << "  " << class_names[c] << ": " << predicted_per_class[c] << "/"
            << gold_per_class[c] << "\n";
    if (row_coverage) out << "vote coverage (rows with >=1 vote): " << *row_coverage << "\n";
    if (lf_coverage && lf_names)
        for (std::size_t c = 0; c < lf_names->size(); ++c)
            out << "  coverage " << (*lf_names)[c] << ": " << (*lf_coverage)[c] << "\n";
    return out.str();
}

EvalReport evaluate(const std::string& probs_csv_path, const std::string& gold_csv_path,
                    const std::string& votes_csv_path) {
    const Dataset probs_table = load_csv(probs_csv_path);
    const std::vector<std::string> class_names = class_names_from_probs_header(probs_table);
    const std::size_t k = class_names.size();
    const std::size_t n = probs_table.n_rows();

    const Dataset gold_table = load_csv(gold_csv_path);
    if (!gold_table.has_column("label"))
        throw Error(ErrorCode::Parse, gold_csv_path + ": missing \"label\" column");
    if (gold_table.n_rows() != n)
        throw Error(ErrorCode::InvalidArgument,
                    "row count mismatch: probs has " + std::to_string(n) + ", gold has " +
                        std::to_string(gold_table.n_rows()));

    auto gold_class = [&](std::size_t row) -> std::size_t {
        const std::string text = gold_table.cell_text(row, "label");
        for (std::size_t c = 0; c < k; ++c)
            if (class_names[c] == text) return c;
        try {
            std::size_t used = 0;
            const int id = std::stoi(text, &used);
            if (used == text.size() && id >= 1 && id <= static_cast<int>(k))
                return static_cast<std::size_t>(id - 1);
        } catch (const std::exception&) {
        }
        throw Error(ErrorCode::Parse,
                    gold_csv_path + ": row " + std::to_string(row) + ": unknown label \"" + text +
                        "\"");
    };

    EvalReport report;
    report.class_names = class_names;
    report.n_rows = n;
    report.predicted_per_class.assign(k, 0);
    report.gold_per_class.assign(k, 0);

    std::size_t correct = 0;
    for (std::size_t row = 0; row < n; ++row) {
        std::size_t best = 0;
        double best_p = -1.0;
        for (std::size_t c = 0; c < k; ++c) {
            double p = 0.0;
            const TypedColumn& col = probs_table.column("p_" + class_names[c]);
            const std::string cell = col.render(row);
            try {
                p = std::stod(cell);
            } catch (const std::exception&) {
                throw Error(ErrorCode::Parse, probs_csv_path + ": row " + std::to_string(row) +
                                                  ": bad probability \"" + cell + "\"");
            }
            if (p > best_p) {  // ties keep the lowest class index
                best_p = p;
                best = c;
            }
        }
        const std::size_t gold = gold_class(row);
        report.predicted_per_class[best] += 1;
        report.gold_per_class[gold] += 1;
        if (best == gold) ++correct;
    }
    report.top1_accuracy = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);

    if (!votes_csv_path.empty()) {
        const Dataset votes_table = load_csv(votes_csv_path);
        if (votes_table.n_rows() != n)
            throw Error(ErrorCode::InvalidArgument, "votes row count mismatch");
        std::vector<std::string> lf_names;
        for (const std::string& col : votes_table.column_names())
            if (col.rfind("lf_", 0) == 0) lf_names.push_back(col.substr(3));
        std::vector<double> lf_cov(lf_names.size(), 0.0);
        std::size_t covered_rows = 0;
        for (std::size_t row = 0; row < n; ++row) {
            bool any = false;
            for (std::size_t j = 0; j < lf_names.size(); ++j) {
                const Vote v = Vote::parse(votes_table.cell_text(row, "lf_" + lf_names[j]));
                if (!v.is_abstain()) {
                    lf_cov[j] += 1.0;
                    any = true;
                }
            }
            if (any) ++covered_rows;
        }
        for (auto& c : lf_cov) c /= n == 0 ? 1.0 : static_cast<double>(n);
        report.row_coverage = n == 0 ? 0.0 : static_cast<double>(covered_rows) / static_cast<double>(n);
        report.lf_coverage = std::move(lf_cov);
        report.lf_names = std::move(lf_names);
    }
    return report;
}

}  // namespace pws
