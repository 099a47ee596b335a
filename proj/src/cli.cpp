#include "knac/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "knac/contingency.hpp"
#include "knac/scenarios.hpp"
#include "knac/service.hpp"
#include "knac/session.hpp"
#include "knac/store.hpp"

namespace knac::cli {

namespace fs = std::filesystem;

namespace {

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Inputs {
    std::string data, expert, clusters, reference;
    std::size_t kmeans = 0;
};

struct Common {
    RecommendParams params;
    std::string linkage = "average";
    std::string axis_mode = "column";
    std::string output;
    std::string format = "json";
};

void add_inputs(CLI::App* cmd, Inputs& in, bool need_expert = true) {
    cmd->add_option("--data", in.data, "feature CSV (header row required)")->required();
    auto* e = cmd->add_option("--expert", in.expert, "expert label CSV");
    if (need_expert) e->required();
    cmd->add_option("--clusters", in.clusters, "automated cluster label CSV");
    cmd->add_option("--reference", in.reference, "ground-truth label CSV used for metrics");
    cmd->add_option("--kmeans", in.kmeans, "run the built-in k-means with k clusters when --clusters is absent");
}

void add_params(CLI::App* cmd, Common& c) {
    cmd->add_option("--epsilon-split", c.params.epsilon_split, "split threshold");
    cmd->add_option("--lambda-split", c.params.lambda_split, "silhouette weight for splits, in [0, 1)");
    cmd->add_option("--epsilon-merge", c.params.epsilon_merge, "merge threshold");
    cmd->add_option("--lambda-merge", c.params.lambda_merge, "linkage weight for merges, in [0, 1]");
    cmd->add_option("--linkage", c.linkage, "single, complete, average or centroid");
    cmd->add_option("--axis-mode", c.axis_mode, "column or row normalisation of the split matrix");
    cmd->add_option("--silhouette-cap", c.params.silhouette_cap, "silhouette subsample size");
    cmd->add_option("--seed", c.params.seed, "random seed");
}

void add_output(CLI::App* cmd, Common& c) {
    cmd->add_option("-o,--output", c.output, "output directory");
    cmd->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "text"}));
}

RecommendParams finish_params(Common& c) {
    try {
        c.params.linkage = linkage_from_string(c.linkage);
        c.params.axis_mode = axis_mode_from_string(c.axis_mode);
        c.params.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    return c.params;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

struct Loaded {
    LabeledDataset dataset;
    StartOptions options;
};

Loaded load_inputs(const Inputs& in, const RecommendParams& params) {
    Loaded l;
    const std::string clusters = in.clusters.empty() ? std::string{} : read_text(in.clusters);
    l.dataset = assemble_dataset(read_text(in.data), read_text(in.expert), clusters);
    if (!l.dataset.clustered()) {
        if (in.kmeans == 0) throw ValidationError("no cluster labels given: pass --clusters or --kmeans k");
        KMeansConfig km;
        km.k = in.kmeans;
        km.seed = params.seed;
        l.options.clusterer = km;
    }
    if (!in.reference.empty())
        l.options.reference_labels = canonicalize_labels(parse_labels(read_text(in.reference), in.reference).labels).ids;
    return l;
}

Session session_for(const Loaded& l, const RecommendParams& params, const std::string& id = "cli") {
    SessionConfig config;
    config.params = params;
    return start(id, l.dataset, config, l.options);
}

nlohmann::json recommendations_doc(const Session& s) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& pr : s.pending) recs.push_back(recommendation_json(s, pr));
    return {{"params", s.config.params}, {"recommendations", recs}};
}

nlohmann::json matrices_doc(const Session& s) {
    const ContingencyMatrix cm = contingency(s.dataset);
    return {{"contingency", cm}, {"h_split", split_matrix(cm, s.config.params.axis_mode)}, {"h_merge", merge_matrix(cm)}};
}

std::string recommendations_text(const Session& s) {
    std::string text;
    for (const auto& pr : s.pending) {
        const nlohmann::json j = recommendation_json(s, pr);
        if (!text.empty()) text += "\n";
        text += j.at("render_text").get<std::string>() + "\n";
        for (const auto& r : j.at("explanation")) text += "  " + r.at("text").get<std::string>() + "\n";
    }
    return text;
}

void write_recommendations(const Session& s, const std::string& dir) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    write_text(fs::path(dir) / "recommendations.json", pretty(recommendations_doc(s)));
    write_text(fs::path(dir) / "recommendations.txt", recommendations_text(s));
    write_text(fs::path(dir) / "contingency.json", pretty(matrices_doc(s)));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string session_summary(const Session& s) {
    std::ostringstream o;
    o << "session " << s.id << " iteration " << s.iteration << " status " << to_string(s.status) << " kb v"
      << s.kb.version << "\n";
    if (!s.pending.empty()) o << "\n" << recommendations_text(s);
    return o.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-augmented clustering review tool", "knac"};
    app.require_subcommand(1);

    Inputs in;
    Common common;
    std::string data_dir;
    std::string session_id;
    std::string accept_list, reject_list;
    std::string rid;
    std::string truth_path, pred_path;
    double threshold = 0.8;
    std::size_t max_iterations = 20;
    int port = 8080;
    std::string host = "0.0.0.0";
    std::string ui_dir;
    std::string scenario = "split";
    std::uint64_t demo_seed = 7;

    auto* recommend = app.add_subcommand("recommend", "compute split and merge recommendations");
    add_inputs(recommend, in);
    add_params(recommend, common);
    add_output(recommend, common);

    auto* explain = app.add_subcommand("explain", "explanation rules, masks and bounding boxes of recommendations");
    add_inputs(explain, in);
    add_params(explain, common);
    add_output(explain, common);
    explain->add_option("--id", rid, "only this recommendation id");

    auto* start_cmd = app.add_subcommand("start", "create a persisted review session");
    add_inputs(start_cmd, in);
    add_params(start_cmd, common);
    start_cmd->add_option("--data-dir", data_dir, "session store (defaults to KNAC_DATA_DIR)");
    start_cmd->add_option("--format", common.format)->check(CLI::IsMember({"json", "text"}));

    auto* apply = app.add_subcommand("apply", "record decisions on a session and close the iteration");
    apply->add_option("--session", session_id, "session id")->required();
    apply->add_option("--accept", accept_list, "comma-separated recommendation ids to accept");
    apply->add_option("--reject", reject_list, "comma-separated recommendation ids to reject");
    apply->add_option("--data-dir", data_dir, "session store (defaults to KNAC_DATA_DIR)");
    apply->add_option("--format", common.format)->check(CLI::IsMember({"json", "text"}));

    auto* eval = app.add_subcommand("eval", "homogeneity, completeness and v-measure of a labelling");
    eval->add_option("--truth", truth_path, "reference label CSV")->required();
    eval->add_option("--pred", pred_path, "predicted label CSV")->required();
    eval->add_option("-o,--output", common.output, "output directory");

    auto* autox = app.add_subcommand("auto-expert", "accept every recommendation above a threshold until convergence");
    add_inputs(autox, in);
    add_params(autox, common);
    add_output(autox, common);
    autox->add_option("--threshold", threshold, "acceptance threshold in [0, 1.01]");
    autox->add_option("--max-iterations", max_iterations, "iteration cap");

    auto* serve = app.add_subcommand("serve", "run the HTTP session API");
    serve->add_option("--port", port, "listen port");
    serve->add_option("--host", host, "listen address");
    serve->add_option("--data-dir", data_dir, "session store (defaults to KNAC_DATA_DIR)");
    serve->add_option("--ui-dir", ui_dir, "static UI bundle served at /");

    auto* demo = app.add_subcommand("demo", "generate a seeded scenario and its recommendations");
    demo->add_option("--scenario", scenario, "split, merge or corrupted")->check(CLI::IsMember({"split", "merge", "corrupted"}));
    demo->add_option("--seed", demo_seed, "random seed");
    add_output(demo, common);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    const auto store_root = [&] { return data_dir.empty() ? SessionStore::default_root() : fs::path(data_dir); };

    try {
        if (recommend->parsed()) {
            const RecommendParams params = finish_params(common);
            const Session s = session_for(load_inputs(in, params), params);
            write_recommendations(s, common.output);
            out << (common.format == "text" ? recommendations_text(s) : pretty(recommendations_doc(s)));
        } else if (explain->parsed()) {
            const RecommendParams params = finish_params(common);
            const Session s = session_for(load_inputs(in, params), params);
            nlohmann::json doc = nlohmann::json::array();
            for (const auto& pr : s.pending)
                if (rid.empty() || pr.id == rid) doc.push_back(explanation_json(s, pr));
            if (!rid.empty() && doc.empty()) throw ValidationError("no recommendation with id '" + rid + "'");
            std::string text;
            for (const auto& e : doc)
                for (const auto& r : e.at("rules")) text += e.at("id").get<std::string>() + "  " + r.at("text").get<std::string>() + "\n";
            if (!common.output.empty()) {
                fs::create_directories(common.output);
                write_text(fs::path(common.output) / "explanations.json", pretty(doc));
                write_text(fs::path(common.output) / "explanations.txt", text);
            }
            out << (common.format == "text" ? text : pretty(doc));
        } else if (start_cmd->parsed()) {
            const RecommendParams params = finish_params(common);
            SessionStore store(store_root());
            const Session s = session_for(load_inputs(in, params), params, store.new_id());
            store.save(s);
            out << (common.format == "text" ? session_summary(s) : pretty(session_view(s)));
        } else if (apply->parsed()) {
            SessionStore store(store_root());
            if (!store.exists(session_id)) throw ValidationError("no session '" + session_id + "' in " + store.root().string());
            Session s = store.load(session_id);
            std::vector<Decision> given;
            for (const auto& id : split_list(accept_list)) given.push_back({id, Verdict::accept, "", "expert", ""});
            for (const auto& id : split_list(reject_list)) given.push_back({id, Verdict::reject, "", "expert", ""});
            s = record_decisions(s, given, s.token());
            s = iterate(s, s.draft);
            store.save(s);
            out << (common.format == "text" ? session_summary(s) : pretty(session_view(s)));
        } else if (eval->parsed()) {
            const LabelColumn truth = parse_labels(read_text(truth_path), truth_path);
            const LabelColumn pred = parse_labels(read_text(pred_path), pred_path);
            if (truth.labels.size() != pred.labels.size())
                throw ValidationError("label files differ in length: " + std::to_string(truth.labels.size()) + " vs " +
                                      std::to_string(pred.labels.size()));
            const std::vector<int> t = canonicalize_labels(truth.labels).ids;
            const std::vector<int> p = canonicalize_labels(pred.labels).ids;
            const nlohmann::json scores = agreement(t, p);
            if (!common.output.empty()) {
                fs::create_directories(common.output);
                write_text(fs::path(common.output) / "scores.json", pretty(scores));
            }
            out << pretty(scores);
        } else if (autox->parsed()) {
            const RecommendParams params = finish_params(common);
            Loaded l = load_inputs(in, params);
            SessionConfig config;
            config.params = params;
            config.max_iterations = max_iterations;
            const Session s = auto_expert(start("auto-expert", l.dataset, config, l.options), threshold);
            const nlohmann::json summary = {{"status", to_string(s.status)},
                                            {"iterations", s.iteration},
                                            {"kb_version", s.kb.version},
                                            {"metrics_history", s.metrics_history}};
            if (!common.output.empty()) {
                const fs::path dir = common.output;
                fs::create_directories(dir);
                write_text(dir / "summary.json", pretty(summary));
                write_text(dir / "kb.json", dump_knowledge_base(s.kb));
                write_text(dir / "kb.txt", render_rules(s.kb) + "\n" + render_tables(s.kb));
                write_text(dir / "labels.csv", labels_csv(s.dataset.row_ids, s.dataset.expert_labels, s.dataset.expert_names));
            }
            if (common.format == "text") {
                out << "status " << to_string(s.status) << " after " << s.iteration << " iterations, kb v" << s.kb.version << "\n";
                for (const auto& r : s.metrics_history) {
                    out << "iteration " << r.iteration << " expert clusters " << r.expert_clusters << " v-measure vs clusters "
                        << format_fixed2(r.vs_clusters.v_measure);
                    if (r.vs_reference) out << " vs reference " << format_fixed2(r.vs_reference->v_measure);
                    out << "\n";
                }
            } else {
                out << pretty(summary);
            }
        } else if (serve->parsed()) {
            ServiceOptions options;
            options.data_dir = store_root();
            options.ui_dir = ui_dir;
            Service service(options);
            err << "knac: serving on " << host << ":" << port << " (data in " << options.data_dir.string() << ")\n";
            if (!service.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
        } else if (demo->parsed()) {
            const Scenario sc = make_scenario(scenario, demo_seed);
            SessionConfig config;
            config.params.seed = demo_seed;
            StartOptions options;
            options.reference_labels = sc.truth;
            const Session s = start("demo-" + scenario, sc.dataset, config, options);
            if (!common.output.empty()) {
                save_dataset(sc.dataset, common.output);
                std::vector<std::string> names;
                for (int b = 0, k = *std::max_element(sc.truth.begin(), sc.truth.end()) + 1; b < k; ++b)
                    names.push_back(std::to_string(b));
                write_text(fs::path(common.output) / "reference.csv", labels_csv(sc.dataset.row_ids, sc.truth, names));
                write_recommendations(s, common.output);
            }
            out << (common.format == "text" ? recommendations_text(s) : pretty(recommendations_doc(s)));
        }
    } catch (const ValidationError& e) {
        err << "knac: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DatasetError& e) {
        err << "knac: " << e.what() << "\n";
        return kExitValidation;
    } catch (const KnowledgeBaseError& e) {
        err << "knac: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SessionError& e) {
        err << "knac: " << e.code << ": " << e.what() << "\n";
        return e.code == "validation" || e.code == "missing_clusters" || e.code == "stale_recommendation" ||
                       e.code == "duplicate_decision" || e.code == "converged"
                   ? kExitValidation
                   : kExitRuntime;
    } catch (const std::invalid_argument& e) {
        err << "knac: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "knac: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace knac::cli
