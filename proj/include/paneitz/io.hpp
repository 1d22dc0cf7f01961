#pragma once

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "paneitz/conformal.hpp"
#include "paneitz/errors.hpp"
#include "paneitz/extremal.hpp"
#include "paneitz/geometry.hpp"
#include "paneitz/maps.hpp"
#include "paneitz/spectrum.hpp"

namespace paneitz {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Backend descriptors
// ---------------------------------------------------------------------------

/// Serializable recipe for a backend: {"kind":..., "params":..., ...}.
struct BackendDescriptor {
    BackendKind kind = BackendKind::Sphere4;
    double radius = 1.0;                              // sphere
    Eigen::Vector4d periods = Eigen::Vector4d::Ones(); // torus
    double radius_a = 1.0, radius_b = 1.0;            // s2xs2
    int max_degree = 3;
    int max_freq = 1;
};

inline json to_json(const BackendDescriptor& d) {
    json j;
    j["kind"] = backend_kind_name(d.kind);
    switch (d.kind) {
        case BackendKind::Sphere4:
            j["params"] = {{"radius", d.radius}};
            j["max_degree"] = d.max_degree;
            break;
        case BackendKind::Torus4:
            j["params"] = {{"periods", {d.periods[0], d.periods[1], d.periods[2], d.periods[3]}}};
            j["max_freq"] = d.max_freq;
            break;
        case BackendKind::S2xS2:
            j["params"] = {{"radius_a", d.radius_a}, {"radius_b", d.radius_b}};
            j["max_degree"] = d.max_degree;
            break;
    }
    return j;
}

inline BackendDescriptor backend_descriptor_from_json(const json& j) {
    BackendDescriptor d;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "sphere") {
        d.kind = BackendKind::Sphere4;
        d.radius = j.at("params").at("radius").get<double>();
        d.max_degree = j.at("max_degree").get<int>();
    } else if (kind == "torus") {
        d.kind = BackendKind::Torus4;
        auto p = j.at("params").at("periods");
        for (int i = 0; i < 4; ++i) d.periods[i] = p.at(i).get<double>();
        d.max_freq = j.at("max_freq").get<int>();
    } else if (kind == "s2xs2") {
        d.kind = BackendKind::S2xS2;
        d.radius_a = j.at("params").at("radius_a").get<double>();
        d.radius_b = j.at("params").at("radius_b").get<double>();
        d.max_degree = j.at("max_degree").get<int>();
    } else {
        throw ConfigError("unknown backend kind '" + kind + "'");
    }
    return d;
}

inline ManifoldBackend build_backend(const BackendDescriptor& d) {
    switch (d.kind) {
        case BackendKind::Sphere4: return build_sphere(d.radius, d.max_degree);
        case BackendKind::Torus4: return build_torus(d.periods, d.max_freq);
        case BackendKind::S2xS2: return build_s2xs2(d.radius_a, d.radius_b, d.max_degree);
    }
    throw ConfigError("unknown backend kind");
}

// ---------------------------------------------------------------------------
// JSON views of results
// ---------------------------------------------------------------------------

inline json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline Eigen::VectorXd vector_from_json(const json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[i] = a.at(i).get<double>();
    return v;
}

inline json to_json(const ClusterSet& cs) {
    json j;
    json groups = json::array();
    for (const auto& g : cs.groups) groups.push_back({g.first, g.second});
    j["groups"] = groups;
    j["tolerance"] = cs.tolerance;
    if (std::isfinite(cs.min_gap)) j["min_gap"] = cs.min_gap;
    j["ambiguous_gaps"] = cs.ambiguous_gaps;
    return j;
}

inline json to_json(const SpectrumResult& sp) {
    json j;
    j["eigenvalues"] = to_json(sp.eigenvalues);
    j["clusters"] = to_json(sp.clusters);
    j["residual_norms"] = to_json(sp.residual_norms);
    return j;
}

inline json to_json(const MoebiusParams& p) {
    json j;
    j["center"] = {p.center[0], p.center[1], p.center[2], p.center[3], p.center[4]};
    j["dilation"] = p.dilation;
    return j;
}

inline json to_json(const BalanceReport& r) {
    json j;
    j["params"] = to_json(r.params);
    j["moments"] = {r.moments[0], r.moments[1], r.moments[2], r.moments[3], r.moments[4]};
    j["residual_history"] = r.residual_history;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    return j;
}

inline json to_json(const DerivativeReport& r) {
    json j;
    j["k"] = r.k;
    j["lambda_k"] = r.lambda_k;
    j["branch_derivatives"] = to_json(r.branch_derivatives);
    j["d_plus"] = r.d_plus;
    j["d_minus"] = r.d_minus;
    j["case"] = gap_case_name(r.gap_case);
    j["cluster"] = {r.cluster.first, r.cluster.second};
    j["min_branch_index"] = r.min_branch_index;
    j["max_branch_index"] = r.max_branch_index;
    return j;
}

inline json to_json(const ExtremalityCertificate& c) {
    json j;
    j["certified"] = c.certified;
    j["residual"] = c.residual;
    j["tolerance"] = c.tolerance;
    j["cluster"] = {c.cluster.first, c.cluster.second};
    j["gram"] = to_json(c.gram);
    j["family_size"] = static_cast<int>(c.family.size());
    if (!c.reason.empty()) j["reason"] = c.reason;
    return j;
}

inline json to_json(const ObstructionReport& r) {
    json j;
    j["k"] = r.k;
    j["lambda_k"] = r.lambda_k;
    j["can_be_local_max"] = r.can_be_local_max;
    j["can_be_local_min"] = r.can_be_local_min;
    j["zero_eigenvalue"] = r.zero_eigenvalue;
    return j;
}

inline json to_json(const SphereValuedMap& m) {
    json j;
    j["p"] = m.p();
    json comps = json::array();
    for (const auto& c : m.components) comps.push_back(to_json(c));
    j["components"] = comps;
    return j;
}

inline SphereValuedMap map_from_json(const json& j) {
    SphereValuedMap m;
    for (const auto& c : j.at("components")) m.components.push_back(vector_from_json(c));
    if (m.p() != j.at("p").get<int>())
        throw ConfigError("map_from_json: component count disagrees with p");
    return m;
}

// ---------------------------------------------------------------------------
// CSV (17 significant digits, row-major)
// ---------------------------------------------------------------------------

inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open '" + path + "' for writing");
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_g17(m(i, j));
        }
        out << '\n';
    }
}

inline void write_eigenvalues_csv(const std::string& path, const Eigen::VectorXd& ev) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open '" + path + "' for writing");
    out << "index,eigenvalue\n";
    for (int i = 0; i < ev.size(); ++i) out << (i + 1) << ',' << format_g17(ev[i]) << '\n';
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<TrajectoryPoint>& traj) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open '" + path + "' for writing");
    out << "step,lambda_k,step_size,direction_id\n";
    for (const auto& p : traj)
        out << p.step << ',' << format_g17(p.lambda_k) << ',' << format_g17(p.step_size) << ','
            << p.direction_id << '\n';
}

// ---------------------------------------------------------------------------
// Config hashing (FNV-1a over the canonical JSON dump)
// ---------------------------------------------------------------------------

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

} // namespace paneitz
