#include "commtopo/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "commtopo/errors.hpp"

namespace commtopo {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw precondition_error("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw precondition_error("cannot open for reading: " + path);
    return f;
}

void write_matrix(std::ofstream& f, const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            f.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
}

Mat read_matrix(std::ifstream& f, int rows, int cols, const std::string& path) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double v = 0.0;
            if (!f.read(reinterpret_cast<char*>(&v), sizeof(double)))
                throw precondition_error("truncated payload: " + path);
            m(r, c) = v;
        }
    return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

json block_ranges(const HankelBundle& b, BlockRange (HankelBundle::*fn)(int) const) {
    json arr = json::array();
    for (int i = 0; i < b.M; ++i) {
        const BlockRange r = (b.*fn)(i);
        arr.push_back({{"offset", r.offset}, {"size", r.size}});
    }
    return arr;
}

}  // namespace

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
    auto f = open_out(path);
    f << "k";
    for (int i = 0; i < traj.m_total(); ++i) f << ",u_" << (i + 1);
    for (int i = 0; i < traj.p_total(); ++i) f << ",y_" << (i + 1);
    for (int i = 0; i < traj.p_total(); ++i) f << ",yclean_" << (i + 1);
    f << "\n";
    for (int k = 0; k < traj.length(); ++k) {
        f << (k + 1);
        for (int i = 0; i < traj.m_total(); ++i) f << "," << format_double(traj.u(i, k));
        for (int i = 0; i < traj.p_total(); ++i) f << "," << format_double(traj.y(i, k));
        for (int i = 0; i < traj.p_total(); ++i) f << "," << format_double(traj.y_clean(i, k));
        f << "\n";
    }
}

TrajectoryData load_trajectory_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw precondition_error("empty trajectory file: " + path);
    const auto header = split_csv_line(line);
    int m = 0, p = 0, pc = 0;
    for (const auto& h : header) {
        if (h.rfind("u_", 0) == 0) ++m;
        if (h.rfind("y_", 0) == 0) ++p;
        if (h.rfind("yclean_", 0) == 0) ++pc;
    }
    if (header.empty() || header[0] != "k" || m < 1 || p < 1)
        throw precondition_error("bad trajectory header: " + path);
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != 1 + m + p + pc)
            throw precondition_error("ragged trajectory row: " + path);
        std::vector<double> vals;
        for (size_t i = 1; i < cells.size(); ++i) vals.push_back(std::stod(cells[i]));
        rows.push_back(std::move(vals));
    }
    const int T = static_cast<int>(rows.size());
    TrajectoryData out;
    out.u.resize(m, T);
    out.y.resize(p, T);
    out.y_clean.resize(pc > 0 ? p : 0, T);
    for (int k = 0; k < T; ++k) {
        for (int i = 0; i < m; ++i) out.u(i, k) = rows[static_cast<size_t>(k)][static_cast<size_t>(i)];
        for (int i = 0; i < p; ++i)
            out.y(i, k) = rows[static_cast<size_t>(k)][static_cast<size_t>(m + i)];
        for (int i = 0; i < pc; ++i)
            out.y_clean(i, k) = rows[static_cast<size_t>(k)][static_cast<size_t>(m + p + i)];
    }
    return out;
}

void save_bundle(const HankelBundle& b, const std::string& base) {
    json meta;
    meta["format"] = "commtopo-bundle-v1";
    meta["M"] = b.M;
    meta["T_ini"] = b.T_ini;
    meta["N"] = b.N;
    meta["L"] = b.L;
    meta["m_sizes"] = b.m_sizes;
    meta["p_sizes"] = b.p_sizes;
    meta["row_maps"]["up"] = block_ranges(b, &HankelBundle::up_range);
    meta["row_maps"]["yp"] = block_ranges(b, &HankelBundle::yp_range);
    meta["row_maps"]["uf"] = block_ranges(b, &HankelBundle::uf_range);
    meta["row_maps"]["yf"] = block_ranges(b, &HankelBundle::yf_range);
    {
        auto f = open_out(base + ".json");
        f << meta.dump(2) << "\n";
    }
    auto f = open_out(base + ".bin", true);
    write_matrix(f, b.up);
    write_matrix(f, b.yp);
    write_matrix(f, b.uf);
    write_matrix(f, b.yf);
}

HankelBundle load_bundle(const std::string& base) {
    json meta;
    {
        auto f = open_in(base + ".json");
        f >> meta;
    }
    if (meta.value("format", "") != "commtopo-bundle-v1")
        throw precondition_error("not a bundle sidecar: " + base + ".json");
    HankelBundle b;
    b.M = meta.at("M").get<int>();
    b.T_ini = meta.at("T_ini").get<int>();
    b.N = meta.at("N").get<int>();
    b.L = meta.at("L").get<int>();
    b.m_sizes = meta.at("m_sizes").get<std::vector<int>>();
    b.p_sizes = meta.at("p_sizes").get<std::vector<int>>();
    auto f = open_in(base + ".bin", true);
    b.up = read_matrix(f, b.m_total() * b.T_ini, b.L, base + ".bin");
    b.yp = read_matrix(f, b.p_total() * b.T_ini, b.L, base + ".bin");
    b.uf = read_matrix(f, b.m_total() * b.N, b.L, base + ".bin");
    b.yf = read_matrix(f, b.p_total() * b.N, b.L, base + ".bin");
    return b;
}

void save_predictor(const Predictor& k, const std::string& base) {
    json meta;
    meta["format"] = "commtopo-predictor-v1";
    meta["M"] = k.M();
    meta["T_ini"] = k.T_ini();
    meta["N"] = k.N();
    meta["m_sizes"] = k.m_sizes();
    meta["p_sizes"] = k.p_sizes();
    meta["rows"] = k.rows();
    meta["cols"] = k.cols();
    if (k.structure())
        meta["structure"] = k.structure()->to_string();
    else
        meta["structure"] = nullptr;
    {
        auto f = open_out(base + ".json");
        f << meta.dump(2) << "\n";
    }
    auto f = open_out(base + ".bin", true);
    write_matrix(f, k.k());
}

Predictor load_predictor(const std::string& base) {
    json meta;
    {
        auto f = open_in(base + ".json");
        f >> meta;
    }
    if (meta.value("format", "") != "commtopo-predictor-v1")
        throw precondition_error("not a predictor sidecar: " + base + ".json");
    HankelBundle shape;
    shape.M = meta.at("M").get<int>();
    shape.T_ini = meta.at("T_ini").get<int>();
    shape.N = meta.at("N").get<int>();
    shape.L = 1;  // placeholder; the predictor does not carry data columns
    shape.m_sizes = meta.at("m_sizes").get<std::vector<int>>();
    shape.p_sizes = meta.at("p_sizes").get<std::vector<int>>();
    auto f = open_in(base + ".bin", true);
    Mat k = read_matrix(f, meta.at("rows").get<int>(), meta.at("cols").get<int>(), base + ".bin");
    std::optional<Topology> structure;
    if (!meta.at("structure").is_null())
        structure = Topology::from_string(meta.at("structure").get<std::string>());
    return Predictor(std::move(k), shape, std::move(structure));
}

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    auto f = open_out(path);
    f << "c,links,topology,pred_cost,objective,mse,seed\n";
    for (const auto& r : rows) {
        f << format_double(r.c) << "," << r.links << "," << r.topology << ","
          << format_double(r.pred_cost) << "," << format_double(r.objective) << ","
          << format_double(r.mse) << "," << r.seed << "\n";
    }
}

std::vector<SweepRow> load_sweep_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw precondition_error("empty sweep file: " + path);
    std::vector<SweepRow> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 7) throw precondition_error("ragged sweep row: " + path);
        SweepRow r;
        r.c = std::stod(cells[0]);
        r.links = std::stoi(cells[1]);
        r.topology = cells[2];
        r.pred_cost = std::stod(cells[3]);
        r.objective = std::stod(cells[4]);
        r.mse = std::stod(cells[5]);
        r.seed = std::stoull(cells[6]);
        out.push_back(std::move(r));
    }
    return out;
}

void save_result_json(const OptimizationResult& result, const BoundsReport& bounds,
                      const std::string& path) {
    json j;
    j["topology"] = result.topology.to_string();
    j["links"] = result.topology.num_links();
    j["objective"] = result.objective;
    j["residual"] = result.residual;
    j["link_cost"] = result.link_cost;
    j["per_agent_residual"] = result.per_agent_residual;
    j["max_abs_entry"] = result.max_abs_entry;
    j["big_m_exceeded"] = result.big_m_exceeded;
    if (result.c_value >= 0.0) j["c"] = result.c_value;
    j["bounds"]["baseline_residual"] = bounds.baseline_residual;
    j["bounds"]["dropped_link_cost"] = bounds.dropped_link_cost;
    j["bounds"]["upper_bound"] = bounds.upper_bound;
    j["bounds"]["achieved_residual"] = bounds.achieved_residual;
    j["bounds"]["lower_slack"] = bounds.lower_slack;
    j["bounds"]["upper_slack"] = bounds.upper_slack;
    j["bounds"]["sandwich_ok"] = bounds.sandwich_ok;
    j["bounds"]["lambda_q_max"] = bounds.lambda_q_max;
    j["bounds"]["weighted_window_bound"] = bounds.weighted_window_bound;
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

void save_communication_value_csv(const CommunicationValueReport& rep,
                                  const std::string& path) {
    auto f = open_out(path);
    f << "c,links,pred_cost,objective,j_opt,j_rand,ratio\n";
    for (const auto& r : rep.rows) {
        f << format_double(r.c_value) << "," << r.links << "," << format_double(r.pred_cost)
          << "," << format_double(r.objective) << "," << format_double(r.j_opt) << ","
          << format_double(r.j_rand) << "," << format_double(r.ratio) << "\n";
    }
}

std::vector<CommunicationValueRow> load_communication_value_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw precondition_error("empty report file: " + path);
    std::vector<CommunicationValueRow> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 7) throw precondition_error("ragged report row: " + path);
        CommunicationValueRow r;
        r.c_value = std::stod(cells[0]);
        r.links = std::stoi(cells[1]);
        r.pred_cost = std::stod(cells[2]);
        r.objective = std::stod(cells[3]);
        r.j_opt = std::stod(cells[4]);
        r.j_rand = std::stod(cells[5]);
        r.ratio = std::stod(cells[6]);
        out.push_back(r);
    }
    return out;
}

}  // namespace commtopo
