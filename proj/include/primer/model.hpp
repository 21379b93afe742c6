// Core domain types for finite-thrust transfer optimization.
//
// All quantities are SI (m, s, kg, rad). Kilometres and degrees only appear
// at I/O boundaries (dataset file, config files, printed tables).
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace primer {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Raised for precondition violations on domain values.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PhysicalConstants {
    double gamma = 398600.436233e9;  // m^3/s^2
    double g0 = 9.80665;             // m/s^2

    void validate() const;
};

struct Vehicle {
    double p_max = 0.0;  // N
    double isp = 0.0;    // s
    double m0 = 0.0;     // kg

    double exhaust_velocity(const PhysicalConstants& k) const { return k.g0 * isp; }
    void validate(const PhysicalConstants& k) const;
};

/// Point of a trajectory in the orbital rotating frame.
struct OrbitalState {
    double t = 0.0;        // s
    double r = 0.0;        // m
    double v_r = 0.0;      // m/s
    double v_theta = 0.0;  // m/s
    double theta = 0.0;    // rad, accumulated (never wrapped)
    double chi = 0.0;      // rad
    double dv = 0.0;       // m/s

    double angular_momentum() const { return r * v_theta; }
    double specific_energy(const PhysicalConstants& k) const {
        return 0.5 * (v_r * v_r + v_theta * v_theta) - k.gamma / r;
    }
};

/// Reduced costate: radial/transversal primer components and the Δv costate.
struct AdjointState {
    double lam = 0.0;
    double mu = 0.0;
    double psi_dv = -1.0;
};

/// Constants of the complete integral (E, A) and the Hamiltonian constant C.
struct AdjointConstants {
    double e_const = 0.0;  // m/s
    double a_const = 0.0;  // m/s
    double c_const = 0.0;  // m/s^2
};

struct ConicElements {
    double l = 0.0;  // semi-latus rectum, m
    double e = 0.0;  // eccentricity
    double f = 0.0;  // true anomaly, rad
};

struct PlanarVelocityState {
    double r = 0.0;
    double v_r = 0.0;
    double v_theta = 0.0;
};

/// r = l/(1 + e cos f), v_r = sqrt(γ/l) e sin f, v_θ = sqrt(γ/l)(1 + e cos f).
/// Throws DomainError when the point does not lie on the conic.
PlanarVelocityState elements_to_state(const ConicElements& el, const PhysicalConstants& k);

ConicElements state_to_elements(double r, double v_r, double v_theta, const PhysicalConstants& k);

// ---------------------------------------------------------------------------
// Bundled numerical-example dataset
// ---------------------------------------------------------------------------

/// Boundary point as printed: radius, velocity components and conic elements.
struct TabulatedOrbitPoint {
    double r_km = 0.0;
    double vr_ms = 0.0;
    double vtheta_ms = 0.0;
    double l_km = 0.0;
    double e = 0.0;
    double f_deg = 0.0;
};

/// One printed row of a solution table. `extra` is A (m/s) for the fixed-angle
/// table, C (m/s^2) for the fixed-time table and unused otherwise; `angle_deg`
/// and `time_s` hold θ_f/Δθ and t_f/Δt depending on the table.
struct TableRow {
    double i_deg = 0.0;
    double dv1 = 0.0;
    double dv2 = 0.0;
    double dv_total = 0.0;
    double lambda0 = 0.0;
    double mu0 = 0.0;
    double e_const = 0.0;
    std::optional<double> extra;
    std::optional<double> angle_deg;
    std::optional<double> time_s;
    bool suspect = false;
};

struct SolutionTable {
    std::vector<TableRow> rows;

    /// Row keyed by inclination in degrees; throws std::out_of_range.
    const TableRow& at(double i_deg) const;
    /// Row with the inclination closest to `i_deg`.
    const TableRow& nearest(double i_deg) const;
};

struct PaperDataset {
    PhysicalConstants constants;
    Vehicle vehicle;
    double p_max_g0 = 0.0;  // thrust as printed, multiples of g0
    TabulatedOrbitPoint initial;
    TabulatedOrbitPoint final_point;
    SolutionTable table5;  // generating (impulsive-limit) solutions, kind I
    SolutionTable table6;  // kind I
    SolutionTable table7;  // kind II, extra = A, angle = Δθ
    SolutionTable table8;  // kind III, extra = C, time = Δt
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// SHA-256 of the checked-in dataset file.
extern const char* const kDatasetSha256;

/// Default on-disk location of the bundled dataset.
std::filesystem::path default_dataset_path();

/// Loads and verifies the bundled dataset. Throws DatasetError when the file is
/// missing, malformed or its checksum differs from kDatasetSha256.
PaperDataset load_paper_dataset();
PaperDataset load_paper_dataset(const std::filesystem::path& path, bool verify_checksum = true);

std::string sha256_hex(const std::string& bytes);

}  // namespace primer
