#pragma once

// Independent reference implementations used as test oracles. They favour
// the most literal dense formulation over speed and share no code with the
// library.

#include "svcevo/community.hpp"
#include "svcevo/entity.hpp"
#include "svcevo/features.hpp"
#include "svcevo/forest.hpp"
#include "svcevo/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline std::string node_name(std::size_t i) {
    char buffer[16];
    std::snprintf(buffer, sizeof buffer, "n%03zu", i);
    return buffer;
}

/// Snapshot over nodes n000..n{N-1} from a symmetric dense weight matrix.
/// Node index i in the snapshot equals row i of `w` (names sort in order).
inline svcevo::Snapshot to_snapshot(const Matrix& w, svcevo::Instant at = svcevo::Instant{0}) {
    std::vector<std::string> nodes;
    std::vector<svcevo::WeightedEdge> edges;
    for (std::size_t i = 0; i < w.size(); ++i) nodes.push_back(node_name(i));
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = i + 1; j < w.size(); ++j)
            if (w[i][j] > 0.0) edges.push_back({i, j, w[i][j]});
    return svcevo::Snapshot(at, nodes, edges);
}

/// Random weighted graph with no isolated nodes.
inline Matrix random_graph(std::mt19937_64& rng, std::size_t n, double p, double max_weight = 5.0) {
    Matrix w(n, std::vector<double>(n, 0.0));
    std::bernoulli_distribution edge(p);
    std::uniform_int_distribution<int> weight(1, static_cast<int>(max_weight * 4));
    auto set = [&](std::size_t i, std::size_t j) { w[i][j] = w[j][i] = weight(rng) / 4.0; };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (edge(rng)) set(i, j);
    for (std::size_t i = 0; i < n; ++i) {
        bool isolated = std::all_of(w[i].begin(), w[i].end(), [](double x) { return x == 0.0; });
        if (isolated && n > 1) set(i, (i + 1 + rng() % (n - 1)) % n);
    }
    return w;
}

inline double aging_coeff(double gap_days, double a, double b) {
    if (gap_days >= b) return 0.0;
    const double ratio = gap_days / a;
    return ratio > 1.0 ? 1.0 / ratio : 1.0;
}

// ---------------------------------------------------------------- modularity

inline double modularity(const Matrix& w, const std::vector<std::size_t>& c, double gamma = 1.0) {
    const std::size_t n = w.size();
    std::vector<double> k(n, 0.0);
    double two_m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            k[i] += w[i][j];
            two_m += w[i][j];
        }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (c[i] == c[j]) q += w[i][j] - gamma * k[i] * k[j] / two_m;
    return q / two_m;
}

/// Enumerates every set partition as a restricted growth string.
inline void for_each_partition(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& visit) {
    std::vector<std::size_t> a(n, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t blocks) {
        if (i == n) {
            visit(a);
            return;
        }
        for (std::size_t label = 0; label <= blocks; ++label) {
            a[i] = label;
            rec(i + 1, std::max(blocks, label + 1));
        }
    };
    rec(0, 0);
}

inline double best_modularity(const Matrix& w, std::vector<std::size_t>* best = nullptr) {
    double q_best = -std::numeric_limits<double>::infinity();
    for_each_partition(w.size(), [&](const std::vector<std::size_t>& c) {
        const double q = modularity(w, c);
        if (q > q_best) {
            q_best = q;
            if (best) *best = c;
        }
    });
    return q_best;
}

/// Largest modularity gain of moving a single node to another existing
/// community or to a fresh singleton.
inline double best_single_move_gain(const Matrix& w, const std::vector<std::size_t>& c, double gamma = 1.0) {
    const double base = modularity(w, c, gamma);
    const std::size_t fresh = *std::max_element(c.begin(), c.end()) + 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<std::size_t> labels(c.begin(), c.end());
        labels.push_back(fresh);
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        for (auto label : labels) {
            if (label == c[i]) continue;
            auto moved = c;
            moved[i] = label;
            best = std::max(best, modularity(w, moved, gamma) - base);
        }
    }
    return best;
}

// ------------------------------------------------------------------ pagerank

/// Solves p = (1-d)/n + d (M p + dangling(p)/n) directly by Gaussian
/// elimination, then normalizes.
inline std::vector<double> pagerank(const Matrix& w, double d = 0.85) {
    const std::size_t n = w.size();
    std::vector<double> k(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k[i] += w[i][j];
    Matrix a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        a[i][i] = 1.0;
        a[i][n] = (1.0 - d) / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (k[j] > 0.0) a[i][j] -= d * w[j][i] / k[j];
            else a[i][j] -= d / static_cast<double>(n);
        }
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> p(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += p[i] = a[i][n] / a[i][i];
    for (auto& v : p) v /= sum;
    return p;
}

// ------------------------------------------------------------------ features

/// Table-1 features straight from their formulas on a dense graph.
/// `members` and `keys` are node indices; `is_service[i]` gives node kinds.
inline svcevo::FeatureVector features(const Matrix& w, const std::vector<std::size_t>& members,
                                      const std::vector<std::size_t>& keys, const std::vector<bool>& is_service,
                                      double cohesion_cap = 1e6) {
    const std::size_t N = w.size();
    const double inf = std::numeric_limits<double>::infinity();

    // Floyd-Warshall on hop counts.
    Matrix hops(N, std::vector<double>(N, inf));
    for (std::size_t i = 0; i < N; ++i) {
        hops[i][i] = 0.0;
        for (std::size_t j = 0; j < N; ++j)
            if (w[i][j] > 0.0) hops[i][j] = 1.0;
    }
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) hops[i][j] = std::min(hops[i][j], hops[i][k] + hops[k][j]);

    auto closeness = [&](std::size_t x) {
        double total = 0.0, reach = 0.0;
        for (std::size_t y = 0; y < N; ++y)
            if (y != x && hops[x][y] < inf) {
                total += hops[x][y];
                reach += 1.0;
            }
        if (total == 0.0) return 0.0;
        return (reach / total) * (reach / static_cast<double>(N - 1));
    };
    auto clustering = [&](std::size_t x) {
        std::vector<std::size_t> nb;
        for (std::size_t y = 0; y < N; ++y)
            if (w[x][y] > 0.0) nb.push_back(y);
        if (nb.size() < 2) return 0.0;
        double links = 0.0;
        for (std::size_t a = 0; a < nb.size(); ++a)
            for (std::size_t b = a + 1; b < nb.size(); ++b)
                if (w[nb[a]][nb[b]] > 0.0) links += 1.0;
        const double d = static_cast<double>(nb.size());
        return links / (d * (d - 1.0) / 2.0);
    };
    auto wd = [&](std::size_t x) {
        double s = 0.0;
        for (std::size_t y = 0; y < N; ++y) s += w[x][y];
        return s;
    };
    auto in = [&](std::size_t x) { return std::find(members.begin(), members.end(), x) != members.end(); };

    const double n = static_cast<double>(members.size());
    double edges = 0.0, sum_in_ordered = 0.0, sum_out = 0.0, act_max = 0.0;
    for (auto p : members)
        for (std::size_t q = 0; q < N; ++q) {
            if (w[p][q] == 0.0) continue;
            if (in(q)) {
                sum_in_ordered += w[p][q];
                edges += 0.5;
                act_max = std::max(act_max, w[p][q]);
            } else {
                sum_out += w[p][q];
            }
        }

    svcevo::FeatureVector f{};
    double cl = 0.0, cc = 0.0, deg = 0.0, max_deg = 0.0, services = 0.0;
    for (auto x : members) {
        cc += clustering(x);
        cl += closeness(x);
        deg += wd(x);
        max_deg = std::max(max_deg, wd(x));
        if (is_service[x]) services += 1.0;
    }
    f[0] = n;
    f[1] = 2.0 * edges / (n * (n - 1.0));
    f[2] = cc / n;
    f[3] = cl / n;
    f[4] = deg / n;
    f[5] = max_deg / ((n - 1.0) * (n - 2.0));
    if (sum_out > 0.0)
        f[6] = (sum_in_ordered / ((n - 1.0) * n)) / (sum_out / (static_cast<double>(N) * (static_cast<double>(N) - n)));
    else
        f[6] = sum_in_ordered > 0.0 ? cohesion_cap : 0.0;
    f[7] = static_cast<double>(keys.size());
    f[8] = act_max;
    f[9] = sum_in_ordered / 2.0;
    f[10] = edges > 0.0 ? f[9] / edges : 0.0;
    f[11] = services / n;
    f[12] = (n - services) / n;
    double kd = 0.0, kc = 0.0;
    for (auto x : keys) {
        kd += wd(x);
        kc += closeness(x);
    }
    f[13] = keys.empty() ? 0.0 : kd / static_cast<double>(keys.size());
    f[14] = keys.empty() ? 0.0 : kc / static_cast<double>(keys.size());
    return f;
}

// ------------------------------------------------------------------- shapley

/// Cover-conditional expectation of the tree output when only the features
/// in `known` are observed.
inline std::vector<double> conditional_value(const svcevo::DecisionTree& tree, std::span<const double> x,
                                             const std::vector<bool>& known, int node = 0) {
    const auto& nd = tree.nodes()[static_cast<std::size_t>(node)];
    if (nd.is_leaf()) return nd.value;
    if (known[static_cast<std::size_t>(nd.feature)])
        return conditional_value(tree, x, known, x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
    const auto& l = tree.nodes()[static_cast<std::size_t>(nd.left)];
    const auto& r = tree.nodes()[static_cast<std::size_t>(nd.right)];
    auto lv = conditional_value(tree, x, known, nd.left);
    auto rv = conditional_value(tree, x, known, nd.right);
    std::vector<double> out(lv.size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (l.cover * lv[c] + r.cover * rv[c]) / nd.cover;
    return out;
}

/// Exhaustive Shapley values over the features used by the tree.
/// Returns [class][feature] plus the empty-coalition value in `base`.
inline std::vector<std::vector<double>> shapley(const svcevo::DecisionTree& tree, std::span<const double> x,
                                                std::vector<double>* base = nullptr) {
    std::vector<std::size_t> players;
    for (const auto& nd : tree.nodes())
        if (!nd.is_leaf()) players.push_back(static_cast<std::size_t>(nd.feature));
    std::sort(players.begin(), players.end());
    players.erase(std::unique(players.begin(), players.end()), players.end());
    const std::size_t k = players.size();
    const std::size_t classes = tree.n_classes();

    std::vector<std::vector<double>> values(std::size_t{1} << k);
    for (std::size_t mask = 0; mask < values.size(); ++mask) {
        std::vector<bool> known(tree.n_features(), false);
        for (std::size_t b = 0; b < k; ++b)
            if (mask >> b & 1) known[players[b]] = true;
        values[mask] = conditional_value(tree, x, known);
    }
    std::vector<double> fact(k + 1, 1.0);
    for (std::size_t i = 1; i <= k; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

    std::vector<std::vector<double>> phi(classes, std::vector<double>(tree.n_features(), 0.0));
    for (std::size_t b = 0; b < k; ++b)
        for (std::size_t mask = 0; mask < values.size(); ++mask) {
            if (mask >> b & 1) continue;
            const auto s = static_cast<std::size_t>(__builtin_popcountll(mask));
            const double weight = fact[s] * fact[k - s - 1] / fact[k];
            for (std::size_t c = 0; c < classes; ++c)
                phi[c][players[b]] += weight * (values[mask | (std::size_t{1} << b)][c] - values[mask][c]);
        }
    if (base) *base = values[0];
    return phi;
}

/// Random well-formed tree over `n_features` columns that splits on at most
/// `active` distinct features. Covers split the parent at random.
inline svcevo::DecisionTree random_tree(std::mt19937_64& rng, std::size_t n_features, std::size_t active,
                                        std::size_t max_depth, std::size_t classes) {
    std::vector<std::size_t> pool(n_features);
    for (std::size_t i = 0; i < n_features; ++i) pool[i] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(active, n_features));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<svcevo::TreeNode> nodes;
    std::function<int(double, std::size_t)> grow = [&](double cover, std::size_t depth) {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(id)].cover = cover;
        if (depth >= max_depth || cover < 2.0 || unit(rng) < 0.2) {
            std::vector<double> value(classes);
            double sum = 0.0;
            for (auto& v : value) sum += v = unit(rng);
            for (auto& v : value) v /= sum;
            nodes[static_cast<std::size_t>(id)].value = value;
            return id;
        }
        const double left_cover = std::max(1.0, std::floor(cover * (0.1 + 0.8 * unit(rng))));
        nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(pool[rng() % pool.size()]);
        nodes[static_cast<std::size_t>(id)].threshold = unit(rng);
        const int l = grow(left_cover, depth + 1);
        nodes[static_cast<std::size_t>(id)].left = l;
        const int r = grow(cover - left_cover, depth + 1);
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    };
    grow(std::floor(20.0 + 200.0 * unit(rng)), 0);
    return svcevo::DecisionTree(n_features, classes, std::move(nodes));
}

} // namespace oracle
