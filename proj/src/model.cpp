#include "primer/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

#ifndef PRIMER_DATA_DIR
#define PRIMER_DATA_DIR "data"
#endif

namespace primer {

const char* const kDatasetSha256 =
    "e0dd8db4b4645159e6776870d43c3680996cb7e6d50b456334055dc7073640ad";

void PhysicalConstants::validate() const {
    if (!(gamma > 0.0)) throw DomainError("gravitational parameter must be positive");
    if (!(g0 > 0.0)) throw DomainError("g0 must be positive");
}

void Vehicle::validate(const PhysicalConstants& k) const {
    if (!(p_max > 0.0)) throw DomainError("p_max must be positive");
    if (!(isp > 0.0)) throw DomainError("isp must be positive");
    if (!(m0 > 0.0)) throw DomainError("m0 must be positive");
    if (!(exhaust_velocity(k) > 0.0)) throw DomainError("exhaust velocity must be positive");
}

PlanarVelocityState elements_to_state(const ConicElements& el, const PhysicalConstants& k) {
    if (!(el.l > 0.0)) throw DomainError("semi-latus rectum must be positive");
    if (!(el.e >= 0.0)) throw DomainError("eccentricity must be non-negative");
    const double denom = 1.0 + el.e * std::cos(el.f);
    if (!(denom > 0.0)) throw DomainError("true anomaly lies beyond the hyperbolic asymptote");
    const double sq = std::sqrt(k.gamma / el.l);
    return {el.l / denom, sq * el.e * std::sin(el.f), sq * denom};
}

ConicElements state_to_elements(double r, double v_r, double v_theta, const PhysicalConstants& k) {
    if (!(r > 0.0)) throw DomainError("radius must be positive");
    if (!(v_theta > 0.0)) throw DomainError("transversal velocity must be positive");
    const double h = r * v_theta;
    const double l = h * h / k.gamma;
    const double e_cos = l / r - 1.0;
    const double e_sin = v_r * std::sqrt(l / k.gamma);
    return {l, std::hypot(e_cos, e_sin), std::atan2(e_sin, e_cos)};
}

// ---------------------------------------------------------------------------

const TableRow& SolutionTable::at(double i_deg) const {
    for (const auto& row : rows) {
        if (row.i_deg == i_deg) return row;
    }
    throw std::out_of_range("no table row for inclination " + std::to_string(i_deg));
}

const TableRow& SolutionTable::nearest(double i_deg) const {
    if (rows.empty()) throw std::out_of_range("empty table");
    return *std::min_element(rows.begin(), rows.end(), [&](const TableRow& a, const TableRow& b) {
        return std::abs(a.i_deg - i_deg) < std::abs(b.i_deg - i_deg);
    });
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw DatasetError("SHA-256 computation failed");
    }
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) {
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return os.str();
}

std::filesystem::path default_dataset_path() {
    if (const char* env = std::getenv("PRIMER_DATASET")) return env;
    return std::filesystem::path(PRIMER_DATA_DIR) / "transfer_tables.json";
}

namespace {

using nlohmann::json;

TabulatedOrbitPoint parse_point(const json& j) {
    TabulatedOrbitPoint p;
    p.r_km = j.at("r_km").get<double>();
    p.vr_ms = j.at("vr_ms").get<double>();
    p.vtheta_ms = j.at("vtheta_ms").get<double>();
    p.l_km = j.at("l_km").get<double>();
    p.e = j.at("e").get<double>();
    p.f_deg = j.at("f_deg").get<double>();
    return p;
}

enum class TableLayout { kFreeAngleTime, kFixedAngle, kFixedTime };

SolutionTable parse_table(const json& j, TableLayout layout) {
    SolutionTable table;
    std::vector<std::size_t> suspect;
    if (j.contains("suspect_rows")) suspect = j.at("suspect_rows").get<std::vector<std::size_t>>();
    const auto& rows = j.at("rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& v = rows[i];
        if (v.size() != 9) throw DatasetError("table row must have 9 columns");
        TableRow row;
        row.i_deg = v[0].get<double>();
        row.dv1 = v[1].get<double>();
        row.dv2 = v[2].get<double>();
        row.dv_total = v[3].get<double>();
        row.lambda0 = v[4].get<double>();
        row.mu0 = v[5].get<double>();
        row.e_const = v[6].get<double>();
        switch (layout) {
            case TableLayout::kFreeAngleTime:
                row.angle_deg = v[7].get<double>();
                row.time_s = v[8].get<double>();
                break;
            case TableLayout::kFixedAngle:
                row.extra = v[7].get<double>();
                row.angle_deg = v[8].get<double>();
                break;
            case TableLayout::kFixedTime:
                row.extra = v[7].get<double>();
                row.time_s = v[8].get<double>();
                break;
        }
        row.suspect = std::find(suspect.begin(), suspect.end(), i) != suspect.end();
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace

PaperDataset load_paper_dataset() { return load_paper_dataset(default_dataset_path(), true); }

PaperDataset load_paper_dataset(const std::filesystem::path& path, bool verify_checksum) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("dataset file not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    if (verify_checksum) {
        const auto digest = sha256_hex(text);
        if (digest != kDatasetSha256) {
            throw DatasetError("dataset checksum mismatch for " + path.string() + ": got " + digest);
        }
    }

    PaperDataset ds;
    try {
        const auto j = json::parse(text);
        const auto& c = j.at("constants");
        ds.constants.gamma = c.at("gamma_m3s2").get<double>();
        ds.constants.g0 = c.at("g0_ms2").get<double>();
        const auto& v = j.at("vehicle");
        ds.p_max_g0 = v.at("p_max_g0").get<double>();
        ds.vehicle.p_max = ds.p_max_g0 * ds.constants.g0;
        ds.vehicle.isp = v.at("isp_s").get<double>();
        ds.vehicle.m0 = v.at("m0_kg").get<double>();
        ds.initial = parse_point(j.at("initial"));
        ds.final_point = parse_point(j.at("final"));
        ds.table5 = parse_table(j.at("table5"), TableLayout::kFreeAngleTime);
        ds.table6 = parse_table(j.at("table6"), TableLayout::kFreeAngleTime);
        ds.table7 = parse_table(j.at("table7"), TableLayout::kFixedAngle);
        ds.table8 = parse_table(j.at("table8"), TableLayout::kFixedTime);
    } catch (const json::exception& e) {
        throw DatasetError(std::string("malformed dataset: ") + e.what());
    }
    ds.constants.validate();
    ds.vehicle.validate(ds.constants);
    return ds;
}

}  // namespace primer
