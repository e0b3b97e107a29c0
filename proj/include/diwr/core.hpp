#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace diwr {

using Vec3 = Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class FileNotFound : public Error {
public:
    explicit FileNotFound(const std::string& path) : Error("file not found: " + path) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class TooFewPoints : public Error {
public:
    explicit TooFewPoints(std::size_t n, std::size_t need = 4)
        : Error("point cloud has " + std::to_string(n) + " points, need at least " +
                std::to_string(need)) {}
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& what) : Error("empty input: " + what) {}
};

class DegenerateExtent : public Error {
public:
    DegenerateExtent() : Error("cloud extent is degenerate (all positions coincide)") {}
};

class SingularQuery : public Error {
public:
    SingularQuery() : Error("query point coincides with a cloud point") {}
};

class StaleTree : public Error {
public:
    StaleTree() : Error("evaluator tree is stale: cloud was mutated after build") {}
};

class EmptyGrid : public Error {
public:
    EmptyGrid() : Error("every grid sample fell inside an exclusion ball") {}
};

class EmptyHighConfidenceSet : public Error {
public:
    EmptyHighConfidenceSet() : Error("no point has confidence above the trust threshold") {}
};

class NonFiniteEnergy : public Error {
public:
    explicit NonFiniteEnergy(const std::string& detail, std::string log = "")
        : Error("non-finite energy: " + detail), detail_(detail), log_(std::move(log)) {}
    const std::string& detail() const { return detail_; }
    const std::string& log() const { return log_; }

private:
    std::string detail_;
    std::string log_;
};

class EmptyLevelSet : public Error {
public:
    EmptyLevelSet() : Error("iso-surface does not intersect the sampling grid") {}
};

class EmptyResult : public Error {
public:
    explicit EmptyResult(const std::string& what) : Error("empty result: " + what) {}
};

class NoInsideOracle : public Error {
public:
    NoInsideOracle() : Error("interior outlier mode requires an inside predicate") {}
};

class EmptyMask : public Error {
public:
    EmptyMask() : Error("selection mask is empty") {}
};

class DegenerateNeighborhood : public Error {
public:
    DegenerateNeighborhood()
        : Error("every neighborhood is degenerate: no area cell could be computed") {}
};

class MismatchedSizes : public Error {
public:
    MismatchedSizes(std::size_t a, std::size_t b)
        : Error("size mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

// ---------------------------------------------------------------------------
// Axis-aligned box

struct Box3 {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};

    static Box3 of_points(const std::vector<Vec3>& pts);

    Vec3 extent() const { return hi - lo; }
    double longest_axis() const { return extent().maxCoeff(); }
    Box3 expanded(double margin) const {
        return {lo - Vec3::Constant(margin), hi + Vec3::Constant(margin)};
    }
    bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
};

// ---------------------------------------------------------------------------
// Seeding

// splitmix64, used to derive independent stream seeds from one user seed.
inline std::uint64_t mix_seed(std::uint64_t state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return mix_seed(base ^ mix_seed(salt));
}

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Parallel helpers. Work is split into fixed-size chunks so that reductions
// accumulate in an order independent of the thread count.

int thread_count();
void set_thread_count(int n);  // n <= 0 restores the hardware default

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Sums body(i) over i in [0,n) with a fixed chunked accumulation order.
double parallel_sum(std::size_t n, const std::function<double(std::size_t)>& body);

}  // namespace diwr
