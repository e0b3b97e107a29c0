#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "diwr/core.hpp"

namespace diwr {

// Records the normalization map  p' = (p - offset) / scale  so that outputs
// can be taken back to the input coordinate frame.
struct ScaleRecord {
    Vec3 offset{0, 0, 0};
    double scale = 1.0;

    Vec3 to_original(const Vec3& p) const { return p * scale + offset; }
    Vec3 to_normalized(const Vec3& p) const { return (p - offset) / scale; }
};

// Point set with the per-point state the optimizer works on: position p_i,
// normal n_i, area weight a_i, confidence c_i and neighbor count rho_i.
// `generation` increments on every batch mutation; spatial structures snapshot
// it so stale use can be detected.
struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;        // zero until initialized
    std::vector<double> area_weights; // a_i >= 0
    std::vector<double> confidences;  // c_i in [0,1]
    std::vector<int> densities;       // rho_i >= 0
    ScaleRecord scale;
    std::uint64_t generation = 0;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    void bump() { ++generation; }

    // Sizes the side channels to match `positions` with neutral defaults
    // (n = 0, a = 1, c = 1, rho = 0).
    void reset_state() {
        normals.assign(size(), Vec3::Zero());
        area_weights.assign(size(), 1.0);
        confidences.assign(size(), 1.0);
        densities.assign(size(), 0);
        bump();
    }

    std::vector<std::size_t> high_confidence_indices(double tau) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < confidences.size(); ++i)
            if (confidences[i] >= tau) idx.push_back(i);
        return idx;
    }
};

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
    bool empty() const { return faces.empty(); }
};

}  // namespace diwr
