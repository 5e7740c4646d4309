#pragma once

#include <vector>

namespace aoce::detail {

/// Forward-reachable set from `start` in an adjacency-list digraph.
inline std::vector<char> reachable_from(const std::vector<std::vector<int>>& adj, int start) {
    std::vector<char> seen(adj.size(), 0);
    std::vector<int> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : adj[v])
            if (!seen[w]) {
                seen[w] = 1;
                stack.push_back(w);
            }
    }
    return seen;
}

struct SccResult {
    std::vector<int> component;  // component id per vertex
    int count = 0;
};

/// Tarjan's strongly connected components, iterative to keep deep age chains
/// off the call stack.
inline SccResult strongly_connected_components(const std::vector<std::vector<int>>& adj) {
    const int n = static_cast<int>(adj.size());
    SccResult out;
    out.component.assign(n, -1);
    std::vector<int> index(n, -1), low(n, 0), stack;
    std::vector<char> on_stack(n, 0);
    int next_index = 0;

    struct Frame {
        int v;
        std::size_t edge;
    };
    std::vector<Frame> call;

    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        call.push_back({root, 0});
        while (!call.empty()) {
            auto& fr = call.back();
            const int v = fr.v;
            if (fr.edge == 0) {
                index[v] = low[v] = next_index++;
                stack.push_back(v);
                on_stack[v] = 1;
            }
            bool descended = false;
            while (fr.edge < adj[v].size()) {
                int w = adj[v][fr.edge++];
                if (index[w] == -1) {
                    call.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w] && index[w] < low[v]) low[v] = index[w];
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                while (true) {
                    int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    out.component[w] = out.count;
                    if (w == v) break;
                }
                ++out.count;
            }
            call.pop_back();
            if (!call.empty()) {
                int parent = call.back().v;
                if (low[v] < low[parent]) low[parent] = low[v];
            }
        }
    }
    return out;
}

/// Closed strongly connected components (no edge leaving the component) —
/// exactly the recurrent classes of a finite chain with this support graph.
inline std::vector<std::vector<int>> recurrent_classes(const std::vector<std::vector<int>>& adj) {
    const auto scc = strongly_connected_components(adj);
    std::vector<char> closed(scc.count, 1);
    for (std::size_t v = 0; v < adj.size(); ++v)
        for (int w : adj[v])
            if (scc.component[v] != scc.component[w]) closed[scc.component[v]] = 0;
    std::vector<std::vector<int>> classes(scc.count);
    for (std::size_t v = 0; v < adj.size(); ++v)
        if (closed[scc.component[v]]) classes[scc.component[v]].push_back(static_cast<int>(v));
    std::vector<std::vector<int>> out;
    for (auto& c : classes)
        if (!c.empty()) out.push_back(std::move(c));
    return out;
}

}  // namespace aoce::detail
