// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#include "stagescore/causal_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace stagescore {

namespace {

const std::map<NodeId, const char*> kNames = {
    {NodeId::O_query, "O_query"},       {NodeId::O_exemplar, "O_exemplar"},
    {NodeId::F_query, "F_query"},       {NodeId::F_exemplar, "F_exemplar"},
    {NodeId::S_query, "S_query"},       {NodeId::S_exemplar, "S_exemplar"},
    {NodeId::Y_query, "Y_query"},       {NodeId::Y_exemplar, "Y_exemplar"},
};

}  // namespace

const char* node_name(NodeId id) { return kNames.at(id); }

NodeId node_from_name(const std::string& name) {
    for (const auto& [id, n] : kNames) {
        if (name == n) return id;
    }
    throw std::invalid_argument("unknown causal variable '" + name + "'");
}

char node_letter(NodeId id) { return node_name(id)[0]; }

int node_rank(NodeId id) {
    switch (node_letter(id)) {
        case 'O': return 0;
        case 'F': return 1;
        case 'S': return 2;
        default: return 3;
    }
}

CausalGraph default_graph() {
    CausalGraph g;
    g.nodes = {
        {NodeId::O_query, "original video features (query)", true},
        {NodeId::O_exemplar, "original video features (exemplar)", true},
        {NodeId::F_query, "fused video features (query)", false},
        {NodeId::F_exemplar, "fused video features (exemplar)", false},
        {NodeId::S_query, "action stage features (query)", false},
        {NodeId::S_exemplar, "action stage features (exemplar)", false},
        {NodeId::Y_query, "action quality score (query)", false},
        {NodeId::Y_exemplar, "action quality score (exemplar)", false},
    };
    g.edges = {
        {NodeId::O_query, NodeId::F_query, EdgeKind::genuine},
        {NodeId::F_query, NodeId::S_query, EdgeKind::genuine},
        {NodeId::S_query, NodeId::Y_query, EdgeKind::genuine},
        {NodeId::O_exemplar, NodeId::F_exemplar, EdgeKind::genuine},
        {NodeId::F_exemplar, NodeId::S_exemplar, EdgeKind::genuine},
        {NodeId::S_exemplar, NodeId::Y_exemplar, EdgeKind::genuine},
        // Appearance and context leak between paired videos, and raw
        // appearance can shortcut directly to stage judgments.
        {NodeId::O_exemplar, NodeId::O_query, EdgeKind::spurious},
        {NodeId::F_exemplar, NodeId::F_query, EdgeKind::spurious},
        {NodeId::O_query, NodeId::S_query, EdgeKind::spurious},
        {NodeId::O_exemplar, NodeId::S_exemplar, EdgeKind::spurious},
    };
    return g;
}

std::vector<std::string> validate(const CausalGraph& g) {
    std::vector<std::string> violations;

    std::set<NodeId> present;
    for (const auto& n : g.nodes) {
        if (!present.insert(n.id).second) {
            violations.push_back(std::string("duplicate node ") + node_name(n.id));
        }
    }
    for (const auto& e : g.edges) {
        if (!present.count(e.source) || !present.count(e.target)) {
            violations.push_back(std::string("edge ") + node_name(e.source) + "->" +
                                 node_name(e.target) + " references a missing node");
        }
    }
    if (!violations.empty()) return violations;

    // Kahn's algorithm on the genuine subgraph; nodes left with nonzero
    // in-degree afterwards are exactly the ones on cycles.
    std::map<NodeId, int> in_degree;
    std::map<NodeId, std::vector<NodeId>> out;
    for (const auto& n : g.nodes) in_degree[n.id] = 0;
    for (const auto& e : g.edges) {
        if (e.kind != EdgeKind::genuine) continue;
        out[e.source].push_back(e.target);
        ++in_degree[e.target];
    }
    std::vector<NodeId> frontier;
    for (const auto& [id, deg] : in_degree) {
        if (deg == 0) frontier.push_back(id);
    }
    std::size_t removed = 0;
    while (!frontier.empty()) {
        NodeId id = frontier.back();
        frontier.pop_back();
        ++removed;
        for (NodeId t : out[id]) {
            if (--in_degree[t] == 0) frontier.push_back(t);
        }
    }
    if (removed < g.nodes.size()) {
        std::string cyclic;
        for (const auto& [id, deg] : in_degree) {
            if (deg > 0) {
                if (!cyclic.empty()) cyclic += ", ";
                cyclic += node_name(id);
            }
        }
        violations.push_back("cycle among genuine edges involving {" + cyclic + "}");
        return violations;
    }

    for (const auto& e : g.edges) {
        if (e.kind != EdgeKind::genuine) continue;
        if (node_rank(e.source) >= node_rank(e.target)) {
            violations.push_back(std::string("genuine edge ") + node_name(e.source) + "->" +
                                 node_name(e.target) + " violates ordering O < F < S < Y");
        }
    }
    return violations;
}

std::string factorization_string(const CausalGraph& g) {
    const auto violations = validate(g);
    if (!violations.empty()) {
        throw std::invalid_argument("factorization_string: graph does not validate: " +
                                    violations.front());
    }

    // Emit most downstream factors first. Rank ordering is a valid reverse
    // topological order because validate() enforced it edge-wise.
    std::vector<VariableNode> ordered = g.nodes;
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        return node_rank(a.id) > node_rank(b.id);
    });

    std::vector<std::string> factors;
    for (const auto& n : ordered) {
        std::set<char> parent_letters;
        for (const auto& e : g.edges) {
            if (e.kind == EdgeKind::genuine && e.target == n.id) {
                parent_letters.insert(node_letter(e.source));
            }
        }
        std::string factor;
        if (parent_letters.empty()) {
            if (n.exogenous) continue;
            factor = std::string("P(") + node_letter(n.id) + ")";
        } else {
            factor = std::string("P(") + node_letter(n.id) + "|";
            bool first = true;
            for (char c : parent_letters) {
                if (!first) factor += ",";
                factor += c;
                first = false;
            }
            factor += ")";
        }
        // Query and exemplar chains are structurally identical; keep one copy.
        if (std::find(factors.begin(), factors.end(), factor) == factors.end()) {
            factors.push_back(factor);
        }
    }

    std::string result;
    for (const auto& f : factors) {
        if (!result.empty()) result += "·";
        result += f;
    }
    return result;
}

std::string graph_to_json_string(const CausalGraph& g, int indent) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : g.nodes) {
        j["nodes"].push_back({{"id", node_name(n.id)},
                              {"description", n.description},
                              {"exogenous", n.exogenous}});
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& e : g.edges) {
        j["edges"].push_back({{"source", node_name(e.source)},
                              {"target", node_name(e.target)},
                              {"kind", e.kind == EdgeKind::genuine ? "genuine" : "spurious"}});
    }
    return j.dump(indent);
}

CausalGraph graph_from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    CausalGraph g;
    for (const auto& n : j.at("nodes")) {
        g.nodes.push_back({node_from_name(n.at("id").get<std::string>()),
                           n.at("description").get<std::string>(),
                           n.at("exogenous").get<bool>()});
    }
    for (const auto& e : j.at("edges")) {
        const std::string kind = e.at("kind").get<std::string>();
        if (kind != "genuine" && kind != "spurious") {
            throw std::invalid_argument("unknown edge kind '" + kind + "'");
        }
        g.edges.push_back({node_from_name(e.at("source").get<std::string>()),
                           node_from_name(e.at("target").get<std::string>()),
                           kind == "genuine" ? EdgeKind::genuine : EdgeKind::spurious});
    }
    return g;
}

}  // namespace stagescore
