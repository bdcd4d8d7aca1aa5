#include "commtopo/topology.hpp"

#include "commtopo/errors.hpp"

namespace commtopo {

Topology::Topology(int M) : M_(M) {
    if (M < 1) throw precondition_error("Topology: M must be >= 1");
    if (M > 31) throw precondition_error("Topology: agent counts above 31 are not supported");
    links_.assign(static_cast<size_t>(M) * static_cast<size_t>(M), 0);
}

Topology Topology::fully_connected(int M) {
    Topology t(M);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            if (i != j) t.set_link(i, j, true);
    return t;
}

bool Topology::link(int i, int j) const {
    return links_[static_cast<size_t>(i) * static_cast<size_t>(M_) + static_cast<size_t>(j)] != 0;
}

void Topology::set_link(int i, int j, bool on) {
    if (i < 0 || i >= M_ || j < 0 || j >= M_)
        throw precondition_error("Topology: link index out of range");
    if (i == j) {
        if (on) throw precondition_error("Topology: the diagonal is structurally zero");
        return;
    }
    links_[static_cast<size_t>(i) * static_cast<size_t>(M_) + static_cast<size_t>(j)] =
        on ? 1 : 0;
}

int Topology::num_links() const {
    int n = 0;
    for (auto v : links_) n += v;
    return n;
}

std::vector<int> Topology::in_neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < M_; ++j)
        if (j != i && link(i, j)) out.push_back(j);
    return out;
}

uint32_t Topology::row_mask_with_self(int i) const {
    uint32_t mask = 1u << i;
    for (int j = 0; j < M_; ++j)
        if (j != i && link(i, j)) mask |= 1u << j;
    return mask;
}

void Topology::set_row_from_mask(int i, uint32_t mask) {
    for (int j = 0; j < M_; ++j)
        if (j != i) set_link(i, j, (mask >> j) & 1u);
}

bool Topology::subset_of(const Topology& other) const {
    if (M_ != other.M_) return false;
    for (size_t k = 0; k < links_.size(); ++k)
        if (links_[k] && !other.links_[k]) return false;
    return true;
}

std::string Topology::to_string() const {
    std::string s;
    for (int i = 0; i < M_; ++i) {
        if (i) s += ';';
        for (int j = 0; j < M_; ++j) s += link(i, j) ? '1' : '0';
    }
    return s;
}

Topology Topology::from_string(const std::string& s) {
    std::vector<std::string> rows;
    std::string cur;
    for (char ch : s) {
        if (ch == ';') {
            rows.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    rows.push_back(cur);
    const int M = static_cast<int>(rows.size());
    Topology t(M);
    for (int i = 0; i < M; ++i) {
        if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != M)
            throw precondition_error("Topology::from_string: ragged adjacency string");
        for (int j = 0; j < M; ++j) {
            const char ch = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
            if (ch != '0' && ch != '1')
                throw precondition_error("Topology::from_string: expected 0/1 entries");
            if (i == j) {
                if (ch == '1')
                    throw precondition_error("Topology::from_string: nonzero diagonal");
                continue;
            }
            t.set_link(i, j, ch == '1');
        }
    }
    return t;
}

LinkCostMatrix LinkCostMatrix::uniform(int M, double value) {
    LinkCostMatrix out;
    out.c = Mat::Constant(M, M, value);
    out.c.diagonal().setZero();
    out.validate();
    return out;
}

void LinkCostMatrix::validate() const {
    if (c.rows() != c.cols() || c.rows() < 1)
        throw precondition_error("LinkCostMatrix: must be square and nonempty");
    for (int i = 0; i < c.rows(); ++i)
        for (int j = 0; j < c.cols(); ++j)
            if (i != j && c(i, j) < 0.0)
                throw precondition_error("LinkCostMatrix: negative cost at (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
}

double LinkCostMatrix::cost_of(const Topology& topo) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j < size(); ++j)
            if (i != j && topo.link(i, j)) s += c(i, j);
    return s;
}

double LinkCostMatrix::dropped_cost(const Topology& topo) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j < size(); ++j)
            if (i != j && !topo.link(i, j)) s += c(i, j);
    return s;
}

double LinkCostMatrix::row_cost(int i, uint32_t mask_with_self) const {
    double s = 0.0;
    for (int j = 0; j < size(); ++j)
        if (j != i && ((mask_with_self >> j) & 1u)) s += c(i, j);
    return s;
}

}  // namespace commtopo
