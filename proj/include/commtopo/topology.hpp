#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "commtopo/linalg.hpp"

namespace commtopo {

/**
 * Directed communication topology over M agents: link(i, j) = true means
 * agent j sends information to agent i. The diagonal is structurally zero;
 * every agent always has its own data.
 */
class Topology {
public:
    explicit Topology(int M);
    static Topology empty(int M) { return Topology(M); }
    static Topology fully_connected(int M);

    int size() const { return M_; }
    bool link(int i, int j) const;
    void set_link(int i, int j, bool on);

    int num_links() const;
    /// Agents j sending to i, ascending, excluding i itself.
    std::vector<int> in_neighbors(int i) const;
    /// Bitmask over senders to agent i, with bit i (self) always set.
    uint32_t row_mask_with_self(int i) const;
    void set_row_from_mask(int i, uint32_t mask);

    bool subset_of(const Topology& other) const;
    bool operator==(const Topology& other) const = default;

    /// Rows joined by ';', e.g. "0110;1010;...".
    std::string to_string() const;
    static Topology from_string(const std::string& s);

private:
    int M_ = 0;
    std::vector<uint8_t> links_;  // row-major M x M
};

/// Nonnegative per-link costs c(i, j) for the directed link j -> i. The
/// diagonal never enters any cost sum.
struct LinkCostMatrix {
    Mat c;

    static LinkCostMatrix uniform(int M, double value);
    void validate() const;
    int size() const { return static_cast<int>(c.rows()); }

    double cost_of(const Topology& topo) const;
    double dropped_cost(const Topology& topo) const;
    /// Cost of agent i's chosen senders.
    double row_cost(int i, uint32_t mask_with_self) const;
};

}  // namespace commtopo
