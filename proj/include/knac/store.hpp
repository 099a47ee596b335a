#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "knac/session.hpp"

namespace knac {

/// Directory-backed session persistence. Each session lives in
/// <root>/<id>/ as
///   session.json        current state
///   decisions.log       append-only JSON lines (decisions, then an iterate marker)
///   kb/initial.json     rule base the session started from
///   kb/vNNNNNN.json     snapshot of every saved rule-base version
///   features.csv, clusters.csv, expert.csv, reference.csv (optional)
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    /// KNAC_DATA_DIR when set, ./knac-data otherwise.
    static std::filesystem::path default_root();

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path dir(const std::string& id) const;

    std::string new_id() const;
    bool exists(const std::string& id) const;
    std::vector<std::string> list() const;

    void save(const Session& session) const;
    Session load(const std::string& id) const;

private:
    std::filesystem::path root_;
};

/// JSON lines for the decision log of `session`, one event per line.
std::vector<std::string> decision_log_lines(const Session& session);

/// Serialized session.json text. Loading and saving it again yields the same bytes.
std::string session_file_text(const Session& session);

}  // namespace knac
