// Copyright (c) 2026 stagescore contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace stagescore {

// Variables of the scoring model's causal graph, one per video:
// O original features, F fused features, S stage features, Y action score.
enum class NodeId {
    O_query,
    O_exemplar,
    F_query,
    F_exemplar,
    S_query,
    S_exemplar,
    Y_query,
    Y_exemplar,
};

enum class EdgeKind { genuine, spurious };

struct VariableNode {
    NodeId id;
    std::string description;
    // Exogenous roots are taken as given and carry no factor in the
    // factorization; non-exogenous roots contribute a marginal P(X).
    bool exogenous = false;
};

struct CausalEdge {
    NodeId source;
    NodeId target;
    EdgeKind kind;
};

// Static declaration of causal structure. The graph is documentation and a
// validation target, not an inference engine: interventions happen inside
// the network architecture.
struct CausalGraph {
    std::vector<VariableNode> nodes;
    std::vector<CausalEdge> edges;
};

const char* node_name(NodeId id);
NodeId node_from_name(const std::string& name);
// Variable letter without the video suffix: "O", "F", "S", "Y".
char node_letter(NodeId id);
// Position in the required ordering O < F < S < Y.
int node_rank(NodeId id);

// The scoring model's graph: genuine chains O->F->S->Y for query and
// exemplar, plus the spurious shortcuts the architecture is built to cut
// (exemplar-to-query appearance leaks and O->S stage shortcuts).
CausalGraph default_graph();

// Returns human-readable violations; empty means the genuine subgraph is a
// DAG respecting O < F < S < Y. A cycle makes ordering checks moot, so cycle
// violations suppress per-edge ordering ones.
std::vector<std::string> validate(const CausalGraph& g);

// Chain-rule factorization over the genuine subgraph, most downstream factor
// first, query/exemplar duplicates collapsed, e.g. "P(Y|S)·P(S|F)·P(F|O)".
// Throws std::invalid_argument if the graph does not validate.
std::string factorization_string(const CausalGraph& g);

std::string graph_to_json_string(const CausalGraph& g, int indent = -1);
CausalGraph graph_from_json_string(const std::string& text);

}  // namespace stagescore
