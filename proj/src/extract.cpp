#include "diwr/extract.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "diwr/core.hpp"
#include "diwr/kdtree.hpp"
#include "diwr/winding.hpp"

namespace diwr {

namespace {

// cell corner offsets and the corner pairs of the twelve cell edges, in the
// order the lookup tables assume
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                  {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// triangles of one z-slab of cells, as global-edge keys plus the
// interpolated crossing positions, three of each per triangle
struct SlabTriangles {
    std::vector<std::uint64_t> keys;
    std::vector<Vec3> points;
};

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t f) {
    while (parent[f] != f) {
        parent[f] = parent[parent[f]];
        f = parent[f];
    }
    return f;
}

// labels each face with the root of its edge-connected group
std::vector<std::uint32_t> face_components(const std::vector<std::array<std::uint32_t, 3>>& faces,
                                           std::size_t vertex_count, std::size_t* group_count) {
    std::vector<std::uint32_t> parent(faces.size());
    std::iota(parent.begin(), parent.end(), 0u);
    std::unordered_map<std::uint64_t, std::uint32_t> first_face;
    first_face.reserve(faces.size() * 2);
    for (std::uint32_t f = 0; f < faces.size(); ++f) {
        for (int e = 0; e < 3; ++e) {
            const std::uint32_t a = faces[f][e];
            const std::uint32_t b = faces[f][(e + 1) % 3];
            const std::uint64_t key =
                static_cast<std::uint64_t>(std::min(a, b)) * vertex_count + std::max(a, b);
            const auto [it, inserted] = first_face.emplace(key, f);
            if (!inserted) {
                const std::uint32_t ra = find_root(parent, f);
                const std::uint32_t rb = find_root(parent, it->second);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    }
    std::size_t groups = 0;
    std::vector<std::uint32_t> label(faces.size());
    for (std::uint32_t f = 0; f < faces.size(); ++f) {
        label[f] = find_root(parent, f);
        if (label[f] == f) ++groups;
    }
    if (group_count) *group_count = groups;
    return label;
}

template <class T>
void append_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

}  // namespace

RetainedCloud retain_high_confidence(const PointCloud& cloud, double tau_in) {
    RetainedCloud result;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.confidences[i] >= tau_in) result.source_index.push_back(i);
    if (result.source_index.empty())
        throw EmptyResult("no point reaches confidence " + std::to_string(tau_in));

    PointCloud& kept = result.cloud;
    kept.positions.reserve(result.source_index.size());
    for (std::size_t i : result.source_index) {
        kept.positions.push_back(cloud.positions[i]);
        kept.normals.push_back(cloud.normals[i]);
        kept.area_weights.push_back(cloud.area_weights[i]);
        kept.confidences.push_back(cloud.confidences[i]);
        kept.densities.push_back(cloud.densities[i]);
    }
    kept.scale = cloud.scale;
    kept.bump();
    return result;
}

TriMesh extract_isosurface(const PointCloud& cloud, const OptimConfig& cfg, int resolution,
                           double iso, bool keep_all_components) {
    if (cloud.size() == 0) throw EmptyInput("iso-surface extraction");
    if (resolution < 32)
        throw Error("extraction resolution must be at least 32, got " +
                    std::to_string(resolution));

    const int n = resolution;
    const double lo = -cfg.box_margin;
    const double step = (1.0 + 2.0 * cfg.box_margin) / static_cast<double>(n - 1);
    const std::size_t plane = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    auto corner_pos = [&](int i, int j, int k) {
        return Vec3(lo + step * i, lo + step * j, lo + step * k);
    };

    // field values on the corner lattice; corners near the cloud get the
    // exact sum so the level crossing never sees far-field truncation
    WindingEvaluator eval(cloud, cfg.beta);
    const KdTree tree(cloud.positions);
    std::vector<double> field(plane * static_cast<std::size_t>(n));
    parallel_for(field.size(), [&](std::size_t idx) {
        const int i = static_cast<int>(idx % n);
        const int j = static_cast<int>((idx / n) % n);
        const int k = static_cast<int>(idx / plane);
        const Vec3 q = corner_pos(i, j, k);
        field[idx] = tree.nearest_dist(q) <= cfg.r_s ? eval_exact(cloud, q, Singular::Skip)
                                                     : eval.eval(q, Singular::Skip);
    });

    // polygonize cells slab-parallel; the merge below is serial and in slab
    // order, so vertex numbering is independent of the thread count
    const int cells = n - 1;
    std::vector<SlabTriangles> slabs(cells);
    parallel_for(static_cast<std::size_t>(cells), [&](std::size_t kc) {
        SlabTriangles& out = slabs[kc];
        double value[8];
        std::uint64_t corner_id[8];
        Vec3 crossing[12];
        std::uint64_t crossing_key[12];
        for (int jc = 0; jc < cells; ++jc) {
            for (int ic = 0; ic < cells; ++ic) {
                int pattern = 0;
                for (int c = 0; c < 8; ++c) {
                    const int i = ic + kCorner[c][0];
                    const int j = jc + kCorner[c][1];
                    const int k = static_cast<int>(kc) + kCorner[c][2];
                    corner_id[c] = static_cast<std::uint64_t>(k) * plane +
                                   static_cast<std::uint64_t>(j) * n + i;
                    value[c] = field[corner_id[c]];
                    if (value[c] < iso) pattern |= 1 << c;
                }
                const int crossed = mc::kEdgeTable[pattern];
                if (crossed == 0) continue;
                for (int e = 0; e < 12; ++e) {
                    if (!(crossed & (1 << e))) continue;
                    const int a = kEdgeEnds[e][0];
                    const int b = kEdgeEnds[e][1];
                    const double mu = (iso - value[a]) / (value[b] - value[a]);
                    const int i = ic + kCorner[a][0];
                    const int j = jc + kCorner[a][1];
                    const int k = static_cast<int>(kc) + kCorner[a][2];
                    const Vec3 pa = corner_pos(i, j, k);
                    const Vec3 pb = corner_pos(ic + kCorner[b][0], jc + kCorner[b][1],
                                               static_cast<int>(kc) + kCorner[b][2]);
                    crossing[e] = pa + mu * (pb - pa);
                    crossing_key[e] = std::min(corner_id[a], corner_id[b]) * field.size() +
                                      std::max(corner_id[a], corner_id[b]);
                }
                for (int t = 0; mc::kTriTable[pattern][t] != -1; t += 3) {
                    for (int v = 0; v < 3; ++v) {
                        const int e = mc::kTriTable[pattern][t + v];
                        out.keys.push_back(crossing_key[e]);
                        out.points.push_back(crossing[e]);
                    }
                }
            }
        }
    });

    TriMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> vertex_of;
    for (const SlabTriangles& slab : slabs) {
        for (std::size_t t = 0; t + 2 < slab.keys.size(); t += 3) {
            std::array<std::uint32_t, 3> face;
            for (std::size_t v = 0; v < 3; ++v) {
                const auto [it, inserted] = vertex_of.emplace(
                    slab.keys[t + v], static_cast<std::uint32_t>(mesh.vertices.size()));
                if (inserted) mesh.vertices.push_back(slab.points[t + v]);
                face[v] = it->second;
            }
            mesh.faces.push_back(face);
        }
    }
    if (mesh.faces.empty()) throw EmptyLevelSet();
    if (keep_all_components) return mesh;

    std::size_t groups = 0;
    const std::vector<std::uint32_t> label =
        face_components(mesh.faces, mesh.vertex_count(), &groups);
    if (groups <= 1) return mesh;

    std::unordered_map<std::uint32_t, std::size_t> group_faces;
    for (std::uint32_t l : label) ++group_faces[l];
    std::uint32_t best = label[0];
    for (const auto& [root, count] : group_faces)
        if (count > group_faces[best] || (count == group_faces[best] && root < best)) best = root;

    TriMesh largest;
    std::vector<std::uint32_t> remap(mesh.vertex_count(), UINT32_MAX);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        if (label[f] != best) continue;
        std::array<std::uint32_t, 3> face;
        for (std::size_t v = 0; v < 3; ++v) {
            std::uint32_t& slot = remap[mesh.faces[f][v]];
            if (slot == UINT32_MAX) {
                slot = static_cast<std::uint32_t>(largest.vertices.size());
                largest.vertices.push_back(mesh.vertices[mesh.faces[f][v]]);
            }
            face[v] = slot;
        }
        largest.faces.push_back(face);
    }
    return largest;
}

MeshAudit audit_mesh(const TriMesh& mesh) {
    MeshAudit audit;
    std::unordered_map<std::uint64_t, int> edge_faces;
    edge_faces.reserve(mesh.face_count() * 2);
    for (const auto& face : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            const std::uint32_t a = face[e];
            const std::uint32_t b = face[(e + 1) % 3];
            const std::uint64_t key =
                static_cast<std::uint64_t>(std::min(a, b)) * mesh.vertex_count() + std::max(a, b);
            ++edge_faces[key];
        }
    }
    for (const auto& [key, count] : edge_faces) {
        if (count == 1) ++audit.boundary_edges;
        if (count > 2) ++audit.nonmanifold_edges;
    }
    face_components(mesh.faces, mesh.vertex_count(), &audit.component_count);
    audit.euler_characteristic = static_cast<std::ptrdiff_t>(mesh.vertex_count()) -
                                 static_cast<std::ptrdiff_t>(edge_faces.size()) +
                                 static_cast<std::ptrdiff_t>(mesh.face_count());
    double volume = 0.0;
    for (const auto& face : mesh.faces)
        volume += mesh.vertices[face[0]]
                      .cross(mesh.vertices[face[1]])
                      .dot(mesh.vertices[face[2]]);
    audit.volume = volume / 6.0;
    return audit;
}

void export_oriented_points(const PointCloud& cloud, const std::string& path) {
    if (cloud.size() == 0) throw EmptyInput("oriented-point export");
    std::string out;
    out += "ply\nformat binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(cloud.size()) + "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "weight"})
        out += std::string("property double ") + name + "\n";
    out += "end_header\n";
    const bool has_n = cloud.normals.size() == cloud.size();
    const bool has_a = cloud.area_weights.size() == cloud.size();
    const bool has_c = cloud.confidences.size() == cloud.size();
    out.reserve(out.size() + cloud.size() * 7 * 8);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.positions[i];
        const Vec3 nrm = has_n ? cloud.normals[i] : Vec3::Zero();
        append_raw(out, p.x());
        append_raw(out, p.y());
        append_raw(out, p.z());
        append_raw(out, nrm.x());
        append_raw(out, nrm.y());
        append_raw(out, nrm.z());
        append_raw(out, (has_a ? cloud.area_weights[i] : 1.0) *
                            (has_c ? cloud.confidences[i] : 1.0));
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot open for writing: " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw Error("write failed: " + path);
}

}  // namespace diwr
