#include "knac/store.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace knac {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::size_t count_lines(const fs::path& path) {
    if (!fs::exists(path)) return 0;
    std::ifstream in(path, std::ios::binary);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

std::string kb_file_name(int version) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "v%06d.json", version);
    return buf;
}

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    return true;
}

}  // namespace

std::vector<std::string> decision_log_lines(const Session& s) {
    std::vector<std::string> lines;
    std::size_t next = 0;
    for (int it : s.iterate_log) {
        for (; next < s.decision_log.size() && s.decision_log[next].iteration == it; ++next) {
            nlohmann::json j = s.decision_log[next].decision;
            j["event"] = "decision";
            j["iteration"] = it;
            lines.push_back(j.dump());
        }
        lines.push_back(nlohmann::json{{"event", "iterate"}, {"iteration", it}}.dump());
    }
    return lines;
}

std::string session_file_text(const Session& session) { return session_state_json(session).dump(2) + "\n"; }

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path SessionStore::default_root() {
    if (const char* env = std::getenv("KNAC_DATA_DIR"); env && *env) return env;
    return "knac-data";
}

fs::path SessionStore::dir(const std::string& id) const {
    if (!valid_id(id)) throw SessionError("invalid_session_id", "invalid session id '" + id + "'");
    return root_ / id;
}

std::string SessionStore::new_id() const {
    std::random_device rd;
    std::mt19937_64 rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    for (;;) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
        std::string id = std::string("s") + buf;
        if (!fs::exists(root_ / id)) return id;
    }
}

bool SessionStore::exists(const std::string& id) const {
    return valid_id(id) && fs::exists(root_ / id / "session.json");
}

std::vector<std::string> SessionStore::list() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_))
        if (entry.is_directory() && fs::exists(entry.path() / "session.json")) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

void SessionStore::save(const Session& s) const {
    const fs::path d = dir(s.id);
    fs::create_directories(d / "kb");
    if (!fs::exists(d / "features.csv")) {
        write_atomic(d / "features.csv", features_csv(s.dataset));
        write_atomic(d / "clusters.csv", labels_csv(s.dataset.row_ids, s.dataset.cluster_labels, s.dataset.cluster_names));
        write_atomic(d / "expert.csv", labels_csv(s.dataset.row_ids, s.dataset.expert_labels, s.dataset.expert_names));
        if (!s.reference_labels.empty()) {
            int k = 0;
            for (int v : s.reference_labels) k = std::max(k, v + 1);
            std::vector<std::string> names;
            for (int i = 0; i < k; ++i) names.push_back(std::to_string(i));
            write_atomic(d / "reference.csv", labels_csv(s.dataset.row_ids, s.reference_labels, names));
        }
        write_atomic(d / "kb" / "initial.json", dump_knowledge_base(s.initial_kb));
    }
    const fs::path kb_file = d / "kb" / kb_file_name(s.kb.version);
    if (!fs::exists(kb_file)) write_atomic(kb_file, dump_knowledge_base(s.kb));

    const std::vector<std::string> lines = decision_log_lines(s);
    const std::size_t have = count_lines(d / "decisions.log");
    if (have > lines.size()) throw SessionError("log_diverged", "decision log on disk is ahead of session " + s.id);
    if (have < lines.size()) {
        std::ofstream log(d / "decisions.log", std::ios::binary | std::ios::app);
        for (std::size_t i = have; i < lines.size(); ++i) log << lines[i] << '\n';
        if (!log.flush()) throw std::runtime_error("cannot append to decision log of " + s.id);
    }
    write_atomic(d / "session.json", session_file_text(s));
}

Session SessionStore::load(const std::string& id) const {
    const fs::path d = dir(id);
    if (!fs::exists(d / "session.json")) throw SessionError("not_found", "no session '" + id + "'");
    LabeledDataset ds = assemble_dataset(read_text(d / "features.csv"), read_text(d / "expert.csv"),
                                         read_text(d / "clusters.csv"));
    std::vector<int> reference;
    if (fs::exists(d / "reference.csv")) {
        LabelColumn col = parse_labels(read_text(d / "reference.csv"), "reference.csv");
        reference = canonicalize_labels(col.labels).ids;
    }
    return session_from_state(nlohmann::json::parse(read_text(d / "session.json")), std::move(ds), std::move(reference));
}

}  // namespace knac
