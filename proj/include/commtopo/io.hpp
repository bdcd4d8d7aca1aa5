#pragma once

#include <string>
#include <vector>

#include "commtopo/control_loop.hpp"
#include "commtopo/data_pipeline.hpp"
#include "commtopo/predictor.hpp"
#include "commtopo/topology_optimizer.hpp"

namespace commtopo {

/// Doubles are printed with 17 significant digits so files round-trip exactly.
std::string format_double(double v);

/// CSV with header `k,u_1..u_m,y_1..y_p,yclean_1..yclean_p`; k is 1-based.
void save_trajectory_csv(const Trajectory& traj, const std::string& path);

struct TrajectoryData {
    Mat u, y, y_clean;
};
TrajectoryData load_trajectory_csv(const std::string& path);

/// Bundle = raw little-endian doubles (row-major, blocks in up/yp/uf/yf
/// order) at <base>.bin plus a JSON sidecar at <base>.json holding the
/// dimensions, row maps and config echo.
void save_bundle(const HankelBundle& bundle, const std::string& base);
HankelBundle load_bundle(const std::string& base);

/// Predictor payload at <base>.bin with a JSON sidecar (dims + structure).
void save_predictor(const Predictor& k, const std::string& base);
Predictor load_predictor(const std::string& base);

/// One sweep-table row; mirrors the optimization summary table with both
/// readings of the prediction cost (pure residual and residual + link cost).
struct SweepRow {
    double c = 0.0;
    int links = 0;
    std::string topology;
    double pred_cost = 0.0;
    double objective = 0.0;
    double mse = 0.0;
    uint64_t seed = 0;
};

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
std::vector<SweepRow> load_sweep_csv(const std::string& path);

void save_result_json(const OptimizationResult& result, const BoundsReport& bounds,
                      const std::string& path);

void save_communication_value_csv(const CommunicationValueReport& rep, const std::string& path);
std::vector<CommunicationValueRow> load_communication_value_csv(const std::string& path);

}  // namespace commtopo
