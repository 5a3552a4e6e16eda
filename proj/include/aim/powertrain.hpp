#pragma once

#include <string>

namespace aim {

enum class VehicleType { CV, BEV, SHEV };

const char* to_string(VehicleType t);
VehicleType vehicle_type_from_string(const std::string& s);

// Equivalent-circuit battery: ideal source V_oc behind ohmic R_b.
struct BatteryParams {
    double v_oc = 0.0;     // open-circuit voltage, V
    double r_b = 0.0;      // internal resistance, Ohm
    double q_max = 0.0;    // charge capacity, C
    double soc_min = 0.0;
    double soc_max = 1.0;

    double energy_capacity() const { return v_oc * q_max; }  // J
    void validate() const;
};

struct FitCoefficients {
    double a_soc = 0.0;   // SOC-rate slope, 1/J
    double a0 = 0.0;      // affine speed intercept, m/s
    double a1 = 0.0;      // affine speed slope, (m/s)/J
    double fit_r2 = 0.0;
};

struct ShevParams {
    double m = 1200.0;          // kg
    double m_f0 = 0.061;        // idling fuel rate, g/s
    double alpha_ps = 0.059;    // fuel per PS output energy, g/kJ
    double p_ps_max = 75e3;     // W
    double p_ss_min = -15e3;    // W
    double p_ss_max = 30e3;     // W
    BatteryParams battery;
    double f_r = 0.01;
    double f_d = 0.47;          // lumped drag, kg/m
    double g = 9.81;
    void validate() const;
};

// Benchmark chassis twins: CV keeps only the fuel path, BEV only the
// electric path (with a wider power band).
struct CvParams {
    double m = 1200.0;
    double m_f0 = 0.061;
    double alpha_ps = 0.059;
    double p_ps_max = 75e3;
    double f_r = 0.01;
    double f_d = 0.47;
    double g = 9.81;
    void validate() const;
};

struct BevParams {
    double m = 1200.0;
    double p_ss_min = -30e3;
    double p_ss_max = 75e3;
    BatteryParams battery;
    double f_r = 0.01;
    double f_d = 0.47;
    double g = 9.81;
    void validate() const;
};

BatteryParams default_battery();
ShevParams shev_defaults();
CvParams cv_defaults();
BevParams bev_defaults();

// dSOC/dt for SS power draw (Eq.-exact square-root form); throws
// std::domain_error when the power exceeds battery capability.
double soc_rate_exact(double p_ss, const BatteryParams& battery);

// Least-squares slope through the origin of the exact SOC rate, sampled
// uniformly on [p_lo, p_hi]; fills a_soc and fit_r2.
FitCoefficients fit_soc_linear(const BatteryParams& battery, double p_lo, double p_hi,
                               int n_samples = 1001);

// Conservative affine over-approximation f*(E) = a0 + a1 E >= sqrt(2E/m)
// on E in [m v_min^2/2, m v_max^2/2]; constrained least squares, solved by
// enumerating tangency candidates. Fills a0, a1 and fit_r2.
FitCoefficients fit_velocity_affine(double m, double v_min, double v_max,
                                    int n_samples = 1001);

// dm_f/ds in g/m (alpha_ps is per kJ, F_PS in N).
double fuel_mass_rate_space(double zeta, double f_ps, double m_f0, double alpha_ps);

// dSOC/ds under the linearized battery model.
double soc_rate_space(double f_ss, const FitCoefficients& fit);

// Uniform runtime view of one vehicle's powertrain, used by dynamics/ocp.
struct VehicleModel {
    VehicleType type = VehicleType::SHEV;
    double m = 0.0, m_f0 = 0.0, alpha_ps = 0.0;
    double p_ps_max = 0.0, p_ss_min = 0.0, p_ss_max = 0.0;
    double f_r = 0.0, f_d = 0.0, g = 9.81;
    BatteryParams battery;
    FitCoefficients soc_fit;
    FitCoefficients vel_fit;
    bool has_fuel = false;
    bool has_battery = false;

    double rolling_force() const { return f_r * m * g; }

    static VehicleModel from(const ShevParams& p, double v_min = 0.1, double v_max = 15.0);
    static VehicleModel from(const CvParams& p, double v_min = 0.1, double v_max = 15.0);
    static VehicleModel from(const BevParams& p, double v_min = 0.1, double v_max = 15.0);
};

VehicleModel default_model(VehicleType t);

// One JSON document per vehicle type; round-trips the defaults bit-exactly.
std::string params_to_json(VehicleType t);
VehicleModel model_from_json_file(const std::string& path);

}  // namespace aim
