#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semivar/errors.hpp"
#include "semivar/mdp.hpp"

namespace semivar {

using nlohmann::json;

// ---------------------------------------------------------------------------
// MDP and policy files
// ---------------------------------------------------------------------------

/// Serializes an MDP to its interchange document: n_states, n_actions, a
/// transition tensor indexed [state][action][next_state], a reward table
/// indexed [state][action] and r_max.
inline json mdp_to_json(const TabularMdp& mdp) {
    json doc;
    doc["n_states"] = mdp.n_states();
    doc["n_actions"] = mdp.n_actions();
    json transition = json::array();
    for (int s = 0; s < mdp.n_states(); ++s) {
        json per_action = json::array();
        for (int a = 0; a < mdp.n_actions(); ++a) {
            json row = json::array();
            for (int t = 0; t < mdp.n_states(); ++t) row.push_back(mdp.transition(a)(s, t));
            per_action.push_back(std::move(row));
        }
        transition.push_back(std::move(per_action));
    }
    doc["transition"] = std::move(transition);
    json reward = json::array();
    for (int s = 0; s < mdp.n_states(); ++s) {
        json row = json::array();
        for (int a = 0; a < mdp.n_actions(); ++a) row.push_back(mdp.reward(s, a));
        reward.push_back(std::move(row));
    }
    doc["reward"] = std::move(reward);
    doc["r_max"] = mdp.r_max();
    return doc;
}

inline TabularMdp mdp_from_json(const json& doc) {
    if (!doc.contains("n_states") || !doc.contains("n_actions") ||
        !doc.contains("transition") || !doc.contains("reward"))
        throw ValidationError("mdp file: missing one of n_states/n_actions/transition/reward");
    const int S = doc["n_states"].get<int>();
    const int A = doc["n_actions"].get<int>();
    if (S < 1 || A < 1) throw ValidationError("mdp file: state and action counts must be >= 1");

    const json& transition = doc["transition"];
    if (static_cast<int>(transition.size()) != S)
        throw ValidationError("mdp file: transition has " + std::to_string(transition.size()) +
                              " state rows, expected " + std::to_string(S));
    std::vector<Matrix> p(static_cast<std::size_t>(A), Matrix::Zero(S, S));
    for (int s = 0; s < S; ++s) {
        const json& per_action = transition[static_cast<std::size_t>(s)];
        if (static_cast<int>(per_action.size()) != A)
            throw ValidationError("mdp file: transition[" + std::to_string(s) + "] has " +
                                  std::to_string(per_action.size()) + " action rows, expected " +
                                  std::to_string(A));
        for (int a = 0; a < A; ++a) {
            const json& row = per_action[static_cast<std::size_t>(a)];
            if (static_cast<int>(row.size()) != S)
                throw ValidationError("mdp file: transition[" + std::to_string(s) + "][" +
                                      std::to_string(a) + "] has " + std::to_string(row.size()) +
                                      " entries, expected " + std::to_string(S));
            for (int t = 0; t < S; ++t)
                p[static_cast<std::size_t>(a)](s, t) = row[static_cast<std::size_t>(t)].get<double>();
        }
    }

    const json& reward = doc["reward"];
    if (static_cast<int>(reward.size()) != S)
        throw ValidationError("mdp file: reward has " + std::to_string(reward.size()) +
                              " rows, expected " + std::to_string(S));
    Matrix r(S, A);
    for (int s = 0; s < S; ++s) {
        const json& row = reward[static_cast<std::size_t>(s)];
        if (static_cast<int>(row.size()) != A)
            throw ValidationError("mdp file: reward[" + std::to_string(s) + "] has " +
                                  std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(A));
        for (int a = 0; a < A; ++a) r(s, a) = row[static_cast<std::size_t>(a)].get<double>();
    }

    std::optional<double> r_max;
    if (doc.contains("r_max")) r_max = doc["r_max"].get<double>();
    return TabularMdp(std::move(p), std::move(r), r_max);
}

inline void save_mdp(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << mdp_to_json(mdp).dump(1) << "\n";
}

inline TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open mdp file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("mdp file parse error in " + path + ": " + e.what());
    }
    return mdp_from_json(doc);
}

inline json policy_to_json(const TabularPolicy& policy) {
    json doc;
    doc["n_states"] = policy.n_states();
    doc["n_actions"] = policy.n_actions();
    json logits = json::array();
    for (int s = 0; s < policy.n_states(); ++s) {
        json row = json::array();
        for (int a = 0; a < policy.n_actions(); ++a) {
            double l = policy.logits()(s, a);
            // -inf logits round-trip as null
            if (std::isfinite(l))
                row.push_back(l);
            else
                row.push_back(nullptr);
        }
        logits.push_back(std::move(row));
    }
    doc["logits"] = std::move(logits);
    return doc;
}

inline TabularPolicy policy_from_json(const json& doc) {
    if (!doc.contains("n_states") || !doc.contains("n_actions"))
        throw ValidationError("policy file: missing n_states/n_actions");
    const int S = doc["n_states"].get<int>();
    const int A = doc["n_actions"].get<int>();
    const bool has_logits = doc.contains("logits");
    const bool has_probs = doc.contains("probs");
    if (!has_logits && !has_probs)
        throw ValidationError("policy file: needs a logits or probs table");
    const json& table = has_logits ? doc["logits"] : doc["probs"];
    if (static_cast<int>(table.size()) != S)
        throw ValidationError("policy file: table has " + std::to_string(table.size()) +
                              " rows, expected " + std::to_string(S));
    Matrix m(S, A);
    for (int s = 0; s < S; ++s) {
        const json& row = table[static_cast<std::size_t>(s)];
        if (static_cast<int>(row.size()) != A)
            throw ValidationError("policy file: row " + std::to_string(s) + " has " +
                                  std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(A));
        for (int a = 0; a < A; ++a) {
            const json& cell = row[static_cast<std::size_t>(a)];
            m(s, a) = cell.is_null() ? -std::numeric_limits<double>::infinity()
                                     : cell.get<double>();
        }
    }
    return has_logits ? TabularPolicy::from_logits(std::move(m))
                      : TabularPolicy::from_probs(m);
}

inline void save_policy(const TabularPolicy& policy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << policy_to_json(policy).dump(1) << "\n";
}

inline TabularPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open policy file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("policy file parse error in " + path + ": " + e.what());
    }
    return policy_from_json(doc);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Doubles print with 17 significant digits so every table round-trips
/// bit-exactly through the loader.
inline std::string csv_format(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_) throw ValidationError("cannot open for writing: " + path);
        write_row(header);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw ValidationError("csv: no column named " + name);
    }

    double number(std::size_t row, const std::string& name) const {
        const std::string& cell = rows.at(row).at(static_cast<std::size_t>(column(name)));
        char* end = nullptr;
        double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str()) throw ValidationError("csv: cell is not numeric: " + cell);
        return v;
    }
};

inline CsvTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open csv file: " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

} // namespace semivar
