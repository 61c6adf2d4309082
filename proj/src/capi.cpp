#include "promptws.h"

#include <cstring>
#include <memory>
#include <string>

#include "canonical.hpp"
#include "client.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "labelmodel.hpp"
#include "pipeline.hpp"
#include "server.hpp"
#include "templates.hpp"
#include "voter.hpp"

using namespace pws;

namespace {

thread_local std::string g_last_error;

pws_status status_from_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return PWS_ERR_INVALID_ARGUMENT;
        case ErrorCode::Parse: return PWS_ERR_PARSE;
        case ErrorCode::Io: return PWS_ERR_IO;
        case ErrorCode::Config: return PWS_ERR_CONFIG;
        case ErrorCode::Capability: return PWS_ERR_CAPABILITY;
        case ErrorCode::Transport: return PWS_ERR_TRANSPORT;
        case ErrorCode::Backend: return PWS_ERR_BACKEND;
        case ErrorCode::Unavailable: return PWS_ERR_UNAVAILABLE;
        case ErrorCode::Internal: return PWS_ERR_INTERNAL;
    }
    return PWS_ERR_INTERNAL;
}

template <typename Fn>
pws_status guarded(Fn&& fn) {
    try {
        fn();
        return PWS_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_from_code(e.code());
    } catch (const Json::exception& e) {
        g_last_error = e.what();
        return PWS_ERR_PARSE;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PWS_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

pws_status require(bool ok, const char* message) {
    if (ok) return PWS_OK;
    g_last_error = message;
    return PWS_ERR_INVALID_ARGUMENT;
}

Template template_from_record(const Json& record) {
    const std::string text = record.at("template").get<std::string>();
    if (record.contains("slots")) {
        std::vector<std::pair<std::string, std::vector<std::string>>> slots;
        for (auto it = record.at("slots").begin(); it != record.at("slots").end(); ++it)
            slots.emplace_back(it.key(), it.value().get<std::vector<std::string>>());
        const std::string image_column = record.value("image_column", std::string("image"));
        return ImageTemplate(std::move(slots), text, image_column);
    }
    std::optional<std::vector<std::string>> choices;
    if (record.contains("answer_choices"))
        choices = record.at("answer_choices").get<std::vector<std::string>>();
    return StringTemplate(text, std::move(choices));
}

BackendConfig backend_config_from_json(const Json& j) {
    BackendConfig cfg;
    const std::string kind = j.value("kind", std::string("mock"));
    if (kind == "mock") cfg.kind = BackendConfig::Kind::mock;
    else if (kind == "mock_encoder") cfg.kind = BackendConfig::Kind::mock_encoder;
    else if (kind == "http") cfg.kind = BackendConfig::Kind::http;
    else if (kind == "remote") cfg.kind = BackendConfig::Kind::remote;
    else throw Error(ErrorCode::Config, "unknown backend kind: " + kind);
    cfg.model_id = j.value("model_id", std::string("mock-1"));
    cfg.endpoint = j.value("endpoint", std::string());
    cfg.api_key = j.value("api_key", std::string());
    if (j.contains("lexicon")) cfg.lexicon = j.at("lexicon").get<std::vector<std::string>>();
    if ((cfg.kind == BackendConfig::Kind::http || cfg.kind == BackendConfig::Kind::remote) &&
        cfg.endpoint.empty())
        throw Error(ErrorCode::Config, "backend endpoint is required for kind " + kind);
    return cfg;
}

Vote vote_from_json(const Json& j) {
    if (j.is_number_integer()) {
        const int v = j.get<int>();
        if (v == 0) return Vote::abstain();
        return Vote(v);
    }
    if (j.is_array()) return Vote(j.get<std::vector<int>>());
    throw Error(ErrorCode::Parse, "a vote must be an integer or a list of integers");
}

}  // namespace

struct pws_dataset {
    Dataset data;
};
struct pws_template {
    Template tmpl;
};
struct pws_client {
    std::unique_ptr<Client> client;
};
struct pws_voter {
    Voter voter;
    int k = 0;
};
struct pws_server {
    std::unique_ptr<Server> server;
};

extern "C" {

const char* pws_version(void) { return "0.1.0"; }

const char* pws_last_error(void) { return g_last_error.c_str(); }

void pws_string_free(char* s) { std::free(s); }

pws_status pws_dataset_load_csv(const char* path, const char* type_hints_json,
                                pws_dataset** out) {
    if (auto st = require(path && out, "path and out are required")) return st;
    return guarded([&] {
        std::map<std::string, ColumnKind> hints;
        if (type_hints_json && *type_hints_json) {
            const Json j = Json::parse(type_hints_json);
            for (auto it = j.begin(); it != j.end(); ++it)
                hints[it.key()] = column_kind_from_name(it.value().get<std::string>());
        }
        *out = new pws_dataset{load_csv(path, hints)};
    });
}

pws_status pws_dataset_load_json(const char* path, pws_dataset** out) {
    if (auto st = require(path && out, "path and out are required")) return st;
    return guarded([&] { *out = new pws_dataset{load_json(path)}; });
}

pws_status pws_dataset_write_csv(const pws_dataset* dataset, const char* path) {
    if (auto st = require(dataset && path, "dataset and path are required")) return st;
    return guarded([&] { write_csv(dataset->data, path); });
}

size_t pws_dataset_rows(const pws_dataset* dataset) {
    return dataset ? dataset->data.n_rows() : 0;
}

size_t pws_dataset_columns(const pws_dataset* dataset) {
    return dataset ? dataset->data.n_columns() : 0;
}

const char* pws_dataset_column_name(const pws_dataset* dataset, size_t index) {
    if (!dataset || index >= dataset->data.n_columns()) return nullptr;
    return dataset->data.column_names()[index].c_str();
}

pws_status pws_dataset_cell(const pws_dataset* dataset, size_t row, const char* column,
                            char** out) {
    if (auto st = require(dataset && column && out, "dataset, column and out are required"))
        return st;
    return guarded([&] { *out = dup_string(dataset->data.cell_text(row, column)); });
}

pws_status pws_dataset_split(const pws_dataset* dataset, double fraction, uint64_t seed,
                             pws_dataset** head, pws_dataset** tail) {
    if (auto st = require(dataset && head && tail, "dataset, head and tail are required"))
        return st;
    return guarded([&] {
        auto [h, t] = split(dataset->data, fraction, seed);
        *head = new pws_dataset{std::move(h)};
        *tail = new pws_dataset{std::move(t)};
    });
}

void pws_dataset_free(pws_dataset* dataset) { delete dataset; }

pws_status pws_template_create(const char* record_json, pws_template** out) {
    if (auto st = require(record_json && out, "record_json and out are required")) return st;
    return guarded([&] {
        *out = new pws_template{template_from_record(Json::parse(record_json))};
    });
}

pws_status pws_template_apply(const pws_template* tmpl, const pws_dataset* dataset, size_t row,
                              char** query_json) {
    if (auto st = require(tmpl && dataset && query_json, "tmpl, dataset and out are required"))
        return st;
    return guarded([&] {
        const Query q = apply(tmpl->tmpl, dataset->data, row);
        *query_json = dup_string(canonical_query(q));
    });
}

pws_status pws_template_apply_all(const pws_template* tmpl, const pws_dataset* dataset,
                                  char** queries_json) {
    if (auto st = require(tmpl && dataset && queries_json, "tmpl, dataset and out are required"))
        return st;
    return guarded([&] {
        Json arr = Json::array();
        for (const Query& q : apply_to_dataset(tmpl->tmpl, dataset->data))
            arr.push_back(query_to_json(q));
        *queries_json = dup_string(canonical_dump(arr));
    });
}

void pws_template_free(pws_template* tmpl) { delete tmpl; }

pws_status pws_client_open(const char* backend_json, const char* cache_path, pws_client** out) {
    if (auto st = require(backend_json && out, "backend_json and out are required")) return st;
    return guarded([&] {
        auto backend = make_backend(backend_config_from_json(Json::parse(backend_json)));
        std::shared_ptr<ResponseCache> cache;
        if (cache_path && *cache_path) cache = std::make_shared<ResponseCache>(cache_path);
        *out = new pws_client{std::make_unique<Client>(std::move(backend), std::move(cache))};
    });
}

pws_status pws_client_run(pws_client* client, const char* queries_json, char** responses_json) {
    if (auto st = require(client && queries_json && responses_json,
                          "client, queries_json and out are required"))
        return st;
    return guarded([&] {
        std::vector<Query> queries;
        for (const Json& jq : Json::parse(queries_json)) queries.push_back(query_from_json(jq));
        Json arr = Json::array();
        for (const Response& r : client->client->run(queries)) arr.push_back(response_to_json(r));
        *responses_json = dup_string(canonical_dump(arr));
    });
}

uint64_t pws_client_cache_hits(const pws_client* client) {
    return client ? client->client->stats().cache_hits : 0;
}

uint64_t pws_client_cache_misses(const pws_client* client) {
    return client ? client->client->stats().cache_misses : 0;
}

uint64_t pws_client_backend_calls(const pws_client* client) {
    return client ? client->client->stats().backend_queries : 0;
}

void pws_client_close(pws_client* client) { delete client; }

pws_status pws_voter_create(const char* spec_json, pws_voter** out) {
    if (auto st = require(spec_json && out, "spec_json and out are required")) return st;
    return guarded([&] {
        const Json spec = Json::parse(spec_json);
        Voter voter;
        voter.matcher = matcher_by_name(spec.value("matcher", std::string("exact")));
        for (auto it = spec.at("label_map").begin(); it != spec.at("label_map").end(); ++it)
            voter.label_map.entries.emplace_back(it.key(), vote_from_json(it.value()));
        int k = spec.value("k", 0);
        if (k == 0)
            for (const auto& [key, vote] : voter.label_map.entries)
                for (int c : vote.classes()) k = std::max(k, c);
        voter.label_map.check_within(k);
        if (spec.contains("calibration")) {
            auto w = spec.at("calibration").get<std::vector<double>>();
            for (double x : w)
                if (!(x > 0.0))
                    throw Error(ErrorCode::InvalidArgument, "calibration weights must be positive");
            voter.calibration = std::move(w);
        }
        *out = new pws_voter{std::move(voter), k};
    });
}

pws_status pws_voter_calibrate(pws_voter* voter, pws_client* client,
                               const char* template_record_json, const char* content_free_json) {
    if (auto st = require(voter && client && template_record_json,
                          "voter, client and template_record_json are required"))
        return st;
    return guarded([&] {
        const Template tmpl = template_from_record(Json::parse(template_record_json));
        const auto* st = std::get_if<StringTemplate>(&tmpl);
        if (!st)
            throw Error(ErrorCode::InvalidArgument, "calibration applies to string templates");
        std::vector<std::string> inputs{"N/A", "", "[MASK]"};
        if (content_free_json && *content_free_json)
            inputs = Json::parse(content_free_json).get<std::vector<std::string>>();
        voter->voter = calibrate(*client->client, *st, voter->voter, inputs);
    });
}

pws_status pws_voter_vote(const pws_voter* voter, const char* response_json, char** vote_out) {
    if (auto st = require(voter && response_json && vote_out,
                          "voter, response_json and out are required"))
        return st;
    return guarded([&] {
        const Response r = response_from_json(Json::parse(response_json));
        *vote_out = dup_string(voter->voter.vote(r).render());
    });
}

void pws_voter_free(pws_voter* voter) { delete voter; }

pws_status pws_label_model_run(const char* votes_json, const char* model_json,
                               char** probs_json) {
    if (auto st = require(votes_json && model_json && probs_json,
                          "votes_json, model_json and out are required"))
        return st;
    return guarded([&] {
        const Json jv = Json::parse(votes_json);
        const int k = jv.at("k").get<int>();
        const Json& rows = jv.at("votes");
        const std::size_t n = rows.size();
        const std::size_t m = n == 0 ? 0 : rows.at(0).size();
        VoteMatrix votes(n, m);
        for (std::size_t i = 0; i < n; ++i) {
            if (rows.at(i).size() != m)
                throw Error(ErrorCode::InvalidArgument, "ragged vote matrix");
            for (std::size_t j = 0; j < m; ++j) votes.at(i, j) = vote_from_json(rows.at(i).at(j));
        }
        votes.check_within(k);

        const Json jm = Json::parse(model_json);
        const std::string kind = jm.value("kind", std::string("naive_bayes"));
        EmOptions em;
        em.max_iters = jm.value("max_iters", em.max_iters);
        em.tol = jm.value("tol", em.tol);

        ProbLabels probs;
        if (kind == "majority") {
            probs = majority_vote(votes, k);
        } else if (kind == "naive_bayes") {
            probs = naive_bayes_predict(votes, naive_bayes_fit(votes, k, em));
        } else if (kind == "triplet") {
            const double balance = jm.value("class_balance", 0.5);
            const SignedVotes sv = to_signed_votes(votes);
            probs = triplet_predict(sv, triplet_fit(sv, balance));
        } else if (kind == "partial") {
            probs = partial_label_fit_predict(votes, k, em);
        } else {
            throw Error(ErrorCode::Config, "unknown label model kind: " + kind);
        }

        Json arr = Json::array();
        for (std::size_t i = 0; i < probs.n_rows(); ++i) {
            Json row = Json::array();
            for (std::size_t c = 0; c < probs.n_classes(); ++c) row.push_back(probs.at(i, c));
            arr.push_back(std::move(row));
        }
        *probs_json = dup_string(canonical_dump(arr));
    });
}

pws_status pws_server_start(const char* backend_json, const char* bind_address,
                            uint32_t token_budget, uint32_t max_batch, pws_server** out) {
    if (auto st = require(backend_json && bind_address && out,
                          "backend_json, bind_address and out are required"))
        return st;
    if (token_budget < 1) {
        g_last_error = "token_budget must be >= 1";
        return PWS_ERR_CONFIG;
    }
    if (max_batch < 1) {
        g_last_error = "max_batch must be >= 1";
        return PWS_ERR_CONFIG;
    }
    return guarded([&] {
        auto backend = make_backend(backend_config_from_json(Json::parse(backend_json)));
        ServerConfig cfg;
        cfg.token_budget = token_budget;
        cfg.max_batch = max_batch;
        *out = new pws_server{serve(std::move(backend), bind_address, cfg)};
    });
}

pws_status pws_server_bound_address(const pws_server* server, char** out) {
    if (auto st = require(server && out, "server and out are required")) return st;
    return guarded([&] { *out = dup_string(server->server->bound_address()); });
}

pws_status pws_server_wait(pws_server* server) {
    if (auto st = require(server != nullptr, "server is required")) return st;
    return guarded([&] { server->server->wait(); });
}

void pws_server_shutdown(pws_server* server) {
    if (server) server->server->stop();
}

void pws_server_free(pws_server* server) { delete server; }

pws_status pws_label_pipeline(const char* config_path, const char* out_dir,
                              const char* cache_path, char** manifest_json) {
    if (auto st = require(config_path && out_dir, "config_path and out_dir are required"))
        return st;
    return guarded([&] {
        LabelRunResult result =
            run_label_pipeline(config_path, out_dir, cache_path ? cache_path : "");
        if (manifest_json) *manifest_json = dup_string(canonical_dump(result.manifest));
    });
}

pws_status pws_evaluate(const char* probs_csv_path, const char* gold_csv_path,
                        const char* votes_csv_path, char** report_json) {
    if (auto st = require(probs_csv_path && gold_csv_path && report_json,
                          "probs_csv_path, gold_csv_path and out are required"))
        return st;
    return guarded([&] {
        EvalReport report =
            evaluate(probs_csv_path, gold_csv_path, votes_csv_path ? votes_csv_path : "");
        *report_json = dup_string(canonical_dump(report.to_json()));
    });
}

}  // extern "C"
