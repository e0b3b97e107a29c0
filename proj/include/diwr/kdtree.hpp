#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "diwr/core.hpp"

namespace diwr {

// Median-split kd-tree over a copied point set. Queries return indices into
// the original ordering.
class KdTree {
public:
    KdTree() = default;

    explicit KdTree(const std::vector<Vec3>& pts) { build(pts); }

    void build(const std::vector<Vec3>& pts) {
        pts_ = pts;
        idx_.resize(pts.size());
        std::iota(idx_.begin(), idx_.end(), 0);
        nodes_.clear();
        if (!pts_.empty()) {
            nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
            build_node(0, static_cast<int>(pts_.size()));
        }
    }

    std::size_t size() const { return pts_.size(); }

    // k nearest neighbors of q, sorted by increasing distance.
    // Pass exclude >= 0 to skip one original index (typically the query's own).
    void knn(const Vec3& q, int k, std::vector<int>& out, int exclude = -1) const {
        out.clear();
        if (nodes_.empty() || k <= 0) return;
        std::vector<std::pair<double, int>> heap;
        heap.reserve(static_cast<std::size_t>(k) + 1);
        knn_recurse(0, q, k, exclude, heap);
        std::sort(heap.begin(), heap.end());
        out.reserve(heap.size());
        for (const auto& [d2, i] : heap) out.push_back(i);
    }

    int radius_count(const Vec3& q, double r) const {
        int count = 0;
        range_visit(0, q, r * r, [&](int, double) { ++count; });
        return count;
    }

    std::vector<int> radius_indices(const Vec3& q, double r) const {
        std::vector<int> out;
        range_visit(0, q, r * r, [&](int i, double) { out.push_back(i); });
        return out;
    }

    bool any_within(const Vec3& q, double r) const {
        return nearest_dist2(q, r * r) <= r * r;
    }

    // Distance to the nearest point, optionally pruned by an upper bound.
    double nearest_dist(const Vec3& q) const { return std::sqrt(nearest_dist2(q)); }

    int nearest_index(const Vec3& q) const {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::max();
        nn_recurse(0, q, best_d2, best);
        return best;
    }

    double nearest_dist2(const Vec3& q,
                         double bound = std::numeric_limits<double>::max()) const {
        if (nodes_.empty()) return std::numeric_limits<double>::max();
        int best = -1;
        double best_d2 = bound;
        nn_recurse(0, q, best_d2, best);
        return best >= 0 ? best_d2 : std::numeric_limits<double>::max();
    }

private:
    static constexpr int kLeafSize = 16;

    struct Node {
        Box3 box;
        int left = -1;   // < 0 for leaves
        int right = -1;
        int begin = 0;
        int end = 0;
    };

    int build_node(int begin, int end) {
        const int node_id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Box3 box;
        box.lo = box.hi = pts_[idx_[begin]];
        for (int i = begin + 1; i < end; ++i) {
            box.lo = box.lo.cwiseMin(pts_[idx_[i]]);
            box.hi = box.hi.cwiseMax(pts_[idx_[i]]);
        }
        nodes_[node_id].box = box;
        nodes_[node_id].begin = begin;
        nodes_[node_id].end = end;
        if (end - begin > kLeafSize) {
            int axis;
            box.extent().maxCoeff(&axis);
            const int mid = (begin + end) / 2;
            std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                             [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
            const int l = build_node(begin, mid);
            const int r = build_node(mid, end);
            nodes_[node_id].left = l;
            nodes_[node_id].right = r;
        }
        return node_id;
    }

    static double box_dist2(const Box3& box, const Vec3& q) {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double lo = box.lo[a] - q[a];
            const double hi = q[a] - box.hi[a];
            const double d = std::max({lo, hi, 0.0});
            d2 += d * d;
        }
        return d2;
    }

    void knn_recurse(int node_id, const Vec3& q, int k, int exclude,
                     std::vector<std::pair<double, int>>& heap) const {
        const Node& node = nodes_[node_id];
        if (static_cast<int>(heap.size()) == k && box_dist2(node.box, q) > heap.front().first)
            return;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int pi = idx_[i];
                if (pi == exclude) continue;
                const double d2 = (pts_[pi] - q).squaredNorm();
                if (static_cast<int>(heap.size()) < k) {
                    heap.emplace_back(d2, pi);
                    std::push_heap(heap.begin(), heap.end());
                } else if (d2 < heap.front().first) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = {d2, pi};
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        const double dl = box_dist2(nodes_[node.left].box, q);
        const double dr = box_dist2(nodes_[node.right].box, q);
        const int near = dl <= dr ? node.left : node.right;
        const int far = dl <= dr ? node.right : node.left;
        knn_recurse(near, q, k, exclude, heap);
        knn_recurse(far, q, k, exclude, heap);
    }

    template <class Visit>
    void range_visit(int node_id, const Vec3& q, double r2, Visit&& visit) const {
        if (nodes_.empty()) return;
        const Node& node = nodes_[node_id];
        if (box_dist2(node.box, q) > r2) return;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int pi = idx_[i];
                const double d2 = (pts_[pi] - q).squaredNorm();
                if (d2 <= r2) visit(pi, d2);
            }
            return;
        }
        range_visit(node.left, q, r2, visit);
        range_visit(node.right, q, r2, visit);
    }

    void nn_recurse(int node_id, const Vec3& q, double& best_d2, int& best) const {
        const Node& node = nodes_[node_id];
        if (box_dist2(node.box, q) >= best_d2) return;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int pi = idx_[i];
                const double d2 = (pts_[pi] - q).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = pi;
                }
            }
            return;
        }
        const double dl = box_dist2(nodes_[node.left].box, q);
        const double dr = box_dist2(nodes_[node.right].box, q);
        if (dl <= dr) {
            nn_recurse(node.left, q, best_d2, best);
            nn_recurse(node.right, q, best_d2, best);
        } else {
            nn_recurse(node.right, q, best_d2, best);
            nn_recurse(node.left, q, best_d2, best);
        }
    }

    std::vector<Vec3> pts_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
};

}  // namespace diwr
