#include "aim/powertrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace aim {

using nlohmann::json;

const char* to_string(VehicleType t) {
    switch (t) {
        case VehicleType::CV: return "CV";
        case VehicleType::BEV: return "BEV";
        case VehicleType::SHEV: return "sHEV";
    }
    return "?";
}

VehicleType vehicle_type_from_string(const std::string& s) {
    if (s == "CV") return VehicleType::CV;
    if (s == "BEV") return VehicleType::BEV;
    if (s == "sHEV" || s == "SHEV") return VehicleType::SHEV;
    throw std::invalid_argument("unknown vehicle type: " + s);
}

void BatteryParams::validate() const {
    if (!(v_oc > 0.0)) throw std::invalid_argument("battery: v_oc must be positive");
    if (!(r_b > 0.0)) throw std::invalid_argument("battery: r_b must be positive");
    if (!(q_max > 0.0)) throw std::invalid_argument("battery: q_max must be positive");
    if (!(0.0 <= soc_min && soc_min < soc_max && soc_max <= 1.0))
        throw std::invalid_argument("battery: need 0 <= soc_min < soc_max <= 1");
}

void ShevParams::validate() const {
    battery.validate();
    if (!(m > 0.0) || !(m_f0 >= 0.0) || !(alpha_ps > 0.0) || !(p_ps_max > 0.0))
        throw std::invalid_argument("shev: bad scalar parameter");
    if (!(p_ss_min < 0.0 && 0.0 < p_ss_max))
        throw std::invalid_argument("shev: need p_ss_min < 0 < p_ss_max");
    // non-singular square root over the admissible SS power range
    if (battery.v_oc * battery.v_oc - 4.0 * p_ss_max * battery.r_b <= 0.0)
        throw std::invalid_argument("shev: battery cannot deliver p_ss_max");
}

void CvParams::validate() const {
    if (!(m > 0.0) || !(m_f0 >= 0.0) || !(alpha_ps > 0.0) || !(p_ps_max > 0.0))
        throw std::invalid_argument("cv: bad scalar parameter");
}

void BevParams::validate() const {
    battery.validate();
    if (!(m > 0.0)) throw std::invalid_argument("bev: bad mass");
    if (!(p_ss_min < 0.0 && 0.0 < p_ss_max))
        throw std::invalid_argument("bev: need p_ss_min < 0 < p_ss_max");
    if (battery.v_oc * battery.v_oc - 4.0 * p_ss_max * battery.r_b <= 0.0)
        throw std::invalid_argument("bev: battery cannot deliver p_ss_max");
}

BatteryParams default_battery() {
    BatteryParams b;
    b.v_oc = 300.0;
    b.r_b = 0.1;
    // tuned so the refit over [-15, 30] kW reproduces a_SOC = -1.944e-7
    b.q_max = 17526.610538;
    b.soc_min = 0.4;
    b.soc_max = 0.7;
    return b;
}

ShevParams shev_defaults() {
    ShevParams p;
    p.battery = default_battery();
    return p;
}

CvParams cv_defaults() { return CvParams{}; }

BevParams bev_defaults() {
    BevParams p;
    p.battery = default_battery();
    return p;
}

double soc_rate_exact(double p_ss, const BatteryParams& battery) {
    const double disc = battery.v_oc * battery.v_oc - 4.0 * p_ss * battery.r_b;
    if (disc < 0.0)
        throw std::domain_error("soc_rate_exact: power beyond battery capability");
    return (-battery.v_oc + std::sqrt(disc)) / (2.0 * battery.r_b * battery.q_max);
}

FitCoefficients fit_soc_linear(const BatteryParams& battery, double p_lo, double p_hi,
                               int n_samples) {
    battery.validate();
    if (!(p_lo < 0.0 && 0.0 < p_hi))
        throw std::invalid_argument("fit_soc_linear: need p_lo < 0 < p_hi");
    if (n_samples < 10) throw std::invalid_argument("fit_soc_linear: need >= 10 samples");
    double spr = 0.0, spp = 0.0;
    std::vector<double> ps(static_cast<size_t>(n_samples)), rs(static_cast<size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        double p = p_lo + (p_hi - p_lo) * i / (n_samples - 1);
        double r = soc_rate_exact(p, battery);
        ps[static_cast<size_t>(i)] = p;
        rs[static_cast<size_t>(i)] = r;
        spr += p * r;
        spp += p * p;
    }
    FitCoefficients fit;
    fit.a_soc = spr / spp;
    double mean = 0.0;
    for (double r : rs) mean += r;
    mean /= n_samples;
    double ss_res = 0.0, ss_tot = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        double e = rs[static_cast<size_t>(i)] - fit.a_soc * ps[static_cast<size_t>(i)];
        ss_res += e * e;
        double d = rs[static_cast<size_t>(i)] - mean;
        ss_tot += d * d;
    }
    fit.fit_r2 = 1.0 - ss_res / ss_tot;
    return fit;
}

FitCoefficients fit_velocity_affine(double m, double v_min, double v_max, int n_samples) {
    if (!(0.0 < v_min && v_min < v_max))
        throw std::invalid_argument("fit_velocity_affine: need 0 < v_min < v_max");
    const int n = n_samples;
    std::vector<double> E(static_cast<size_t>(n)), gv(static_cast<size_t>(n));
    const double e_lo = 0.5 * m * v_min * v_min, e_hi = 0.5 * m * v_max * v_max;
    for (int i = 0; i < n; ++i) {
        E[static_cast<size_t>(i)] = e_lo + (e_hi - e_lo) * i / (n - 1);
        gv[static_cast<size_t>(i)] = std::sqrt(2.0 * E[static_cast<size_t>(i)] / m);
    }
    auto objective = [&](double a0, double a1) {
        double o = 0.0;
        for (int i = 0; i < n; ++i) {
            double e = a0 + a1 * E[static_cast<size_t>(i)] - gv[static_cast<size_t>(i)];
            o += e * e;
        }
        return o;
    };
    auto feasible = [&](double a0, double a1) {
        for (int i = 0; i < n; ++i)
            if (a0 + a1 * E[static_cast<size_t>(i)] < gv[static_cast<size_t>(i)] - 1e-9)
                return false;
        return true;
    };

    double best_obj = std::numeric_limits<double>::infinity();
    double best_a0 = 0.0, best_a1 = 0.0;
    auto consider = [&](double a0, double a1) {
        if (!feasible(a0, a1)) return;
        double o = objective(a0, a1);
        if (o < best_obj) {
            best_obj = o;
            best_a0 = a0;
            best_a1 = a1;
        }
    };

    // unconstrained least squares
    double se = 0.0, sg = 0.0, see = 0.0, seg = 0.0;
    for (int i = 0; i < n; ++i) {
        se += E[static_cast<size_t>(i)];
        sg += gv[static_cast<size_t>(i)];
        see += E[static_cast<size_t>(i)] * E[static_cast<size_t>(i)];
        seg += E[static_cast<size_t>(i)] * gv[static_cast<size_t>(i)];
    }
    double det = n * see - se * se;
    consider((see * sg - se * seg) / det, (n * seg - se * sg) / det);

    // the target is strictly concave, so an optimal feasible line touches the
    // grid at one point (LS-optimal slope through it) or two adjacent points
    for (int j = 0; j < n; ++j) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            double de = E[static_cast<size_t>(i)] - E[static_cast<size_t>(j)];
            num += de * (gv[static_cast<size_t>(i)] - gv[static_cast<size_t>(j)]);
            den += de * de;
        }
        double a1 = num / den;
        consider(gv[static_cast<size_t>(j)] - a1 * E[static_cast<size_t>(j)], a1);
    }
    for (int j = 0; j + 1 < n; ++j) {
        double a1 = (gv[static_cast<size_t>(j + 1)] - gv[static_cast<size_t>(j)]) /
                    (E[static_cast<size_t>(j + 1)] - E[static_cast<size_t>(j)]);
        consider(gv[static_cast<size_t>(j)] - a1 * E[static_cast<size_t>(j)], a1);
    }

    FitCoefficients fit;
    fit.a0 = best_a0;
    fit.a1 = best_a1;
    double mean = sg / n, ss_tot = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = gv[static_cast<size_t>(i)] - mean;
        ss_tot += d * d;
    }
    fit.fit_r2 = 1.0 - best_obj / ss_tot;
    return fit;
}

double fuel_mass_rate_space(double zeta, double f_ps, double m_f0, double alpha_ps) {
    if (zeta < 0.0) throw std::invalid_argument("fuel rate: zeta must be non-negative");
    if (f_ps < 0.0) throw std::invalid_argument("fuel rate: F_PS must be non-negative");
    return m_f0 * zeta + alpha_ps * f_ps / 1000.0;
}

double soc_rate_space(double f_ss, const FitCoefficients& fit) { return fit.a_soc * f_ss; }

VehicleModel VehicleModel::from(const ShevParams& p, double v_min, double v_max) {
    p.validate();
    VehicleModel v;
    v.type = VehicleType::SHEV;
    v.m = p.m;
    v.m_f0 = p.m_f0;
    v.alpha_ps = p.alpha_ps;
    v.p_ps_max = p.p_ps_max;
    v.p_ss_min = p.p_ss_min;
    v.p_ss_max = p.p_ss_max;
    v.f_r = p.f_r;
    v.f_d = p.f_d;
    v.g = p.g;
    v.battery = p.battery;
    v.soc_fit = fit_soc_linear(p.battery, p.p_ss_min, p.p_ss_max);
    v.vel_fit = fit_velocity_affine(p.m, v_min, v_max);
    v.has_fuel = true;
    v.has_battery = true;
    return v;
}

VehicleModel VehicleModel::from(const CvParams& p, double v_min, double v_max) {
    p.validate();
    VehicleModel v;
    v.type = VehicleType::CV;
    v.m = p.m;
    v.m_f0 = p.m_f0;
    v.alpha_ps = p.alpha_ps;
    v.p_ps_max = p.p_ps_max;
    v.p_ss_min = 0.0;
    v.p_ss_max = 0.0;
    v.f_r = p.f_r;
    v.f_d = p.f_d;
    v.g = p.g;
    v.vel_fit = fit_velocity_affine(p.m, v_min, v_max);
    v.has_fuel = true;
    v.has_battery = false;
    return v;
}

VehicleModel VehicleModel::from(const BevParams& p, double v_min, double v_max) {
    p.validate();
    VehicleModel v;
    v.type = VehicleType::BEV;
    v.m = p.m;
    v.m_f0 = 0.0;
    v.alpha_ps = 0.0;
    v.p_ps_max = 0.0;
    v.p_ss_min = p.p_ss_min;
    v.p_ss_max = p.p_ss_max;
    v.f_r = p.f_r;
    v.f_d = p.f_d;
    v.g = p.g;
    v.battery = p.battery;
    v.soc_fit = fit_soc_linear(p.battery, p.p_ss_min, p.p_ss_max);
    v.vel_fit = fit_velocity_affine(p.m, v_min, v_max);
    v.has_fuel = false;
    v.has_battery = true;
    return v;
}

VehicleModel default_model(VehicleType t) {
    switch (t) {
        case VehicleType::CV: return VehicleModel::from(cv_defaults());
        case VehicleType::BEV: return VehicleModel::from(bev_defaults());
        case VehicleType::SHEV: return VehicleModel::from(shev_defaults());
    }
    throw std::invalid_argument("default_model: bad type");
}

namespace {

json battery_json(const BatteryParams& b) {
    return json{{"v_oc", b.v_oc},
                {"r_b", b.r_b},
                {"q_max", b.q_max},
                {"soc_min", b.soc_min},
                {"soc_max", b.soc_max}};
}

BatteryParams battery_from_json(const json& j) {
    BatteryParams b;
    b.v_oc = j.at("v_oc");
    b.r_b = j.at("r_b");
    b.q_max = j.at("q_max");
    b.soc_min = j.at("soc_min");
    b.soc_max = j.at("soc_max");
    return b;
}

}  // namespace

std::string params_to_json(VehicleType t) {
    json j;
    j["type"] = to_string(t);
    switch (t) {
        case VehicleType::SHEV: {
            auto p = shev_defaults();
            j["m"] = p.m;
            j["m_f0"] = p.m_f0;
            j["alpha_ps"] = p.alpha_ps;
            j["p_ps_max"] = p.p_ps_max;
            j["p_ss_min"] = p.p_ss_min;
            j["p_ss_max"] = p.p_ss_max;
            j["f_r"] = p.f_r;
            j["f_d"] = p.f_d;
            j["g"] = p.g;
            j["battery"] = battery_json(p.battery);
            break;
        }
        case VehicleType::CV: {
            auto p = cv_defaults();
            j["m"] = p.m;
            j["m_f0"] = p.m_f0;
            j["alpha_ps"] = p.alpha_ps;
            j["p_ps_max"] = p.p_ps_max;
            j["f_r"] = p.f_r;
            j["f_d"] = p.f_d;
            j["g"] = p.g;
            break;
        }
        case VehicleType::BEV: {
            auto p = bev_defaults();
            j["m"] = p.m;
            j["p_ss_min"] = p.p_ss_min;
            j["p_ss_max"] = p.p_ss_max;
            j["f_r"] = p.f_r;
            j["f_d"] = p.f_d;
            j["g"] = p.g;
            j["battery"] = battery_json(p.battery);
            break;
        }
    }
    return j.dump(2);
}

VehicleModel model_from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open params file: " + path);
    json j = json::parse(is);
    VehicleType t = vehicle_type_from_string(j.at("type"));
    switch (t) {
        case VehicleType::SHEV: {
            ShevParams p;
            p.m = j.at("m");
            p.m_f0 = j.at("m_f0");
            p.alpha_ps = j.at("alpha_ps");
            p.p_ps_max = j.at("p_ps_max");
            p.p_ss_min = j.at("p_ss_min");
            p.p_ss_max = j.at("p_ss_max");
            p.f_r = j.at("f_r");
            p.f_d = j.at("f_d");
            p.g = j.at("g");
            p.battery = battery_from_json(j.at("battery"));
            return VehicleModel::from(p);
        }
        case VehicleType::CV: {
            CvParams p;
            p.m = j.at("m");
            p.m_f0 = j.at("m_f0");
            p.alpha_ps = j.at("alpha_ps");
            p.p_ps_max = j.at("p_ps_max");
            p.f_r = j.at("f_r");
            p.f_d = j.at("f_d");
            p.g = j.at("g");
            return VehicleModel::from(p);
        }
        case VehicleType::BEV: {
            BevParams p;
            p.m = j.at("m");
            p.p_ss_min = j.at("p_ss_min");
            p.p_ss_max = j.at("p_ss_max");
            p.f_r = j.at("f_r");
            p.f_d = j.at("f_d");
            p.g = j.at("g");
            p.battery = battery_from_json(j.at("battery"));
            return VehicleModel::from(p);
        }
    }
    throw std::runtime_error("unreachable");
}

}  // namespace aim
