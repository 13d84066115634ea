#pragma once

// Rectangular quadrature grids for integrals over R^d. Nodes sit at
// lower + i*step per axis, endpoints included, each carrying weight
// prod(step): the rectangle rule on the grid (the "integer grid" of
// [-50,50]^d is lower=-50, upper=50, step=1).

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpd {

struct GridSpec {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> step;
    std::uint64_t max_nodes = std::uint64_t(1) << 24;

    /// Grid with the same bounds/step on every axis.
    static GridSpec uniform(int dim, double lo, double hi, double h) {
        GridSpec g;
        g.lower.assign(dim, lo);
        g.upper.assign(dim, hi);
        g.step.assign(dim, h);
        return g;
    }

    int dim() const { return static_cast<int>(lower.size()); }

    void validate() const {
        if (lower.empty() || lower.size() != upper.size() || lower.size() != step.size())
            throw std::invalid_argument("grid: lower/upper/step must be non-empty and equally sized");
        for (std::size_t j = 0; j < lower.size(); ++j) {
            if (!(lower[j] < upper[j]))
                throw std::invalid_argument("grid: lower must be < upper componentwise");
            if (!(step[j] > 0.0)) throw std::invalid_argument("grid: step must be > 0");
        }
    }

    /// Nodes along axis j.
    std::int64_t axis_nodes(int j) const {
        return static_cast<std::int64_t>((upper[j] - lower[j]) / step[j] + 1e-9) + 1;
    }

    std::uint64_t total_nodes() const {
        std::uint64_t n = 1;
        for (int j = 0; j < dim(); ++j) n *= static_cast<std::uint64_t>(axis_nodes(j));
        return n;
    }

    /// Throws a resource error (with a coarser-step suggestion) past the node cap.
    void check_node_cap() const {
        const std::uint64_t n = total_nodes();
        if (n > max_nodes) {
            const double blow = static_cast<double>(n) / static_cast<double>(max_nodes);
            const double factor = std::pow(blow, 1.0 / dim());
            throw std::runtime_error("grid: node count " + std::to_string(n) + " exceeds cap " +
                                     std::to_string(max_nodes) + "; coarsen step by a factor >= " +
                                     std::to_string(factor));
        }
    }

    /// Quadrature weight of one node.
    double node_weight() const {
        double w = 1.0;
        for (double h : step) w *= h;
        return w;
    }

    /// Decodes a flat node index (row-major, axis 0 slowest) into coordinates.
    void node(std::uint64_t idx, std::span<double> out) const {
        for (int j = dim() - 1; j >= 0; --j) {
            const auto m = static_cast<std::uint64_t>(axis_nodes(j));
            out[j] = lower[j] + static_cast<double>(idx % m) * step[j];
            idx /= m;
        }
    }
};

}  // namespace mpd
