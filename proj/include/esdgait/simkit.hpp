#pragma once

// Synthetic electrostatic-discharge gait signals.
//
// The body is modelled as a series combination of the two foot-to-ground
// capacitances and any couplings to nearby objects. Foot contact and lift
// change the foot capacitance, and the resulting change of 1/C_B drives a
// current through the body-to-plant coupling. The current seen by the plant
// electrode falls off with the radial distance of the walker.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "random.hpp"
#include "record.hpp"

namespace esdgait::simkit {

using TimeFunction = std::function<double(double)>;

inline TimeFunction constant(double value) {
  return [value](double) { return value; };
}

/// Capacitances that make up the body model, each a function of time (farads).
struct CapacitanceModel {
  TimeFunction c_f1;
  TimeFunction c_f2;
  std::vector<TimeFunction> c_room;  // may be empty
  double c_plant = 10e-12;
};

struct ElectrodeModel {
  double epsilon = 8.8541878128e-12;  // F/m, air
  double area_s = 0.5;                // m^2

  void validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("electrode epsilon must be > 0");
    if (!(area_s > 0.0)) throw ValidationError("electrode area_s must be > 0");
  }
};

/// Walker position relative to the plant electrode (metres).
struct Trajectory {
  TimeFunction x_of_t;
  TimeFunction y_of_t;

  double radial_distance(double t) const { return std::hypot(x_of_t(t), y_of_t(t)); }

  /// Constant-velocity walk along x at lateral offset y.
  static Trajectory straight(double x_start, double velocity, double y) {
    return {[=](double t) { return x_start + velocity * t; }, constant(y)};
  }

  static Trajectory fixed(double x, double y) { return {constant(x), constant(y)}; }
};

// --- body capacitance and induced current -----------------------------------

namespace detail {

inline double checked_reciprocal(double c, const std::string& term, double t) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw DomainError("capacitance " + term + " = " + std::to_string(c) +
                      " F is not positive at t = " + std::to_string(t) + " s");
  }
  return 1.0 / c;
}

}  // namespace detail

/// 1/C_B(t) = 1/C_f1 + 1/C_f2 + sum_i 1/C_r,i  (1/farads).
inline double reciprocal_body_capacitance(const CapacitanceModel& model, double t) {
  double sum = detail::checked_reciprocal(model.c_f1(t), "c_f1", t) +
               detail::checked_reciprocal(model.c_f2(t), "c_f2", t);
  for (std::size_t i = 0; i < model.c_room.size(); ++i)
    sum += detail::checked_reciprocal(model.c_room[i](t), "c_room[" + std::to_string(i) + "]", t);
  return sum;
}

/// Central-difference stencil and the interval it must stay inside.
struct DifferenceStencil {
  double step = 1.0 / kDefaultSampleRate;
  double t_begin = -std::numeric_limits<double>::infinity();
  double t_end = std::numeric_limits<double>::infinity();
};

/// Current generated by the feet alone: k_prop * C_plant * d/dt (1/C_B).
inline double foot_motion_current(const CapacitanceModel& model, double t, double k_prop = 1.0,
                                  const DifferenceStencil& stencil = {}) {
  const double h = stencil.step;
  if (!(h > 0.0)) throw ValidationError("difference step must be > 0");
  const double slack = 1e-9 * h;
  if (t - h < stencil.t_begin - slack || t + h > stencil.t_end + slack) {
    throw BoundaryError("t = " + std::to_string(t) + " s is within one difference step of the interval boundary");
  }
  if (!(model.c_plant > 0.0)) throw DomainError("c_plant must be positive");
  const double derivative =
      (reciprocal_body_capacitance(model, t + h) - reciprocal_body_capacitance(model, t - h)) / (2.0 * h);
  return k_prop * model.c_plant * derivative;
}

/// i(t) = eps * S / sqrt(x^2 + y^2) * I(t).
inline double induced_current(const Trajectory& traj, const ElectrodeModel& electrode,
                              const TimeFunction& foot_current, double t) {
  const double r = traj.radial_distance(t);
  if (!(r > 0.0)) throw SingularityError("radial distance to the plant is zero at t = " + std::to_string(t) + " s");
  return electrode.epsilon * electrode.area_s / r * foot_current(t);
}

// --- gait and mood profiles ------------------------------------------------

struct GaitProfile {
  double step_frequency = 1.5;  // steps per second, both feet
  double walking_speed = 1.2;   // m/s
  double vertical_amplitude = 1.0;
  int contact_charge_sign = -1;
  int detach_charge_sign = +1;
  double duty_cycle = 0.6;  // fraction of a stride each foot is on the ground

  void validate() const {
    if (!(step_frequency > 0.0 && step_frequency <= 10.0))
      throw ValidationError("step_frequency must be in (0, 10] Hz");
    if (!(walking_speed > 0.0)) throw ValidationError("walking_speed must be > 0");
    if (!(vertical_amplitude > 0.0)) throw ValidationError("vertical_amplitude must be > 0");
    if (!(duty_cycle > 0.0 && duty_cycle < 1.0)) throw ValidationError("duty_cycle must be in (0, 1)");
    if (std::abs(contact_charge_sign) != 1 || detach_charge_sign != -contact_charge_sign)
      throw ValidationError("charge signs must be +/-1 and opposite for contact and detach");
  }
};

enum class Mood { happy, sad };

inline std::string to_string(Mood mood) { return mood == Mood::happy ? "happy" : "sad"; }

inline Mood parse_mood(const std::string& s) {
  if (s == "happy") return Mood::happy;
  if (s == "sad") return Mood::sad;
  throw ValidationError("unknown mood '" + s + "'");
}

struct MoodProfile {
  Mood label = Mood::happy;
  double speed_factor = 1.0;
  double amplitude_factor = 1.0;
  double step_frequency_factor = 1.0;

  static MoodProfile happy() { return {Mood::happy, 1.25, 1.2, 1.15}; }
  static MoodProfile sad() { return {Mood::sad, 0.8, 0.8, 0.85}; }

  void validate() const {
    if (!(speed_factor > 0.0 && amplitude_factor > 0.0 && step_frequency_factor > 0.0))
      throw ValidationError("mood factors must be positive");
    if (label == Mood::sad && !(speed_factor < 1.0 && amplitude_factor < 1.0))
      throw ValidationError("sad mood requires speed_factor < 1 and amplitude_factor < 1");
    if (label == Mood::happy && !(speed_factor >= 1.0 && amplitude_factor >= 1.0))
      throw ValidationError("happy mood requires speed_factor >= 1 and amplitude_factor >= 1");
  }
};

/// Gait after applying an optional mood.
inline GaitProfile apply_mood(GaitProfile gait, const std::optional<MoodProfile>& mood) {
  if (mood) {
    gait.walking_speed *= mood->speed_factor;
    gait.vertical_amplitude *= mood->amplitude_factor;
    gait.step_frequency *= mood->step_frequency_factor;
  }
  return gait;
}

/// Plateau capacitances from which synthesizers build a CapacitanceModel.
/// Magnitudes are order-of-magnitude guesses; only waveform shape matters
/// after standardization.
struct CapacitanceParams {
  double foot_contact = 300e-12;   // foot on the floor
  double foot_airborne = 100e-12;  // foot lifted
  double plant = 10e-12;
  double rise_time = 0.05;  // s, raised-cosine contact/lift edge
  std::vector<double> room;
  double k_prop = 1.0;

  void validate() const {
    if (!(foot_contact > 0.0 && foot_airborne > 0.0 && plant > 0.0))
      throw ValidationError("capacitances must be > 0");
    if (!(rise_time > 0.0)) throw ValidationError("rise_time must be > 0");
    for (double c : room)
      if (!(c > 0.0)) throw ValidationError("room capacitances must be > 0");
    if (!(k_prop > 0.0)) throw ValidationError("k_prop must be > 0");
  }

  nlohmann::json to_json() const {
    return {{"foot_contact", foot_contact}, {"foot_airborne", foot_airborne}, {"plant", plant},
            {"rise_time", rise_time},       {"room", room},                   {"k_prop", k_prop}};
  }
};

/// 1/C_f(t) of one foot over a periodic stride: the foot lands at phase 0,
/// lifts after duty*stride, and each transition is a raised-cosine edge of
/// width `rise`. Landing lowers 1/C_f (negative current spike) and lifting
/// raises it (positive spike) when `inv_contact < inv_airborne`.
class FootWaveform {
public:
  FootWaveform(double inv_contact, double inv_airborne, double stride, double duty, double rise,
               double first_contact)
      : inv_contact_(inv_contact),
        inv_airborne_(inv_airborne),
        stride_(stride),
        contact_len_(duty * stride),
        rise_(rise),
        first_contact_(first_contact) {
    if (!(rise_ <= contact_len_ && contact_len_ + rise_ <= stride_)) {
      throw ValidationError("duty cycle leaves less than one rise time of contact or swing per stride");
    }
  }

  double reciprocal(double t) const {
    double phase = std::fmod(t - first_contact_, stride_);
    if (phase < 0.0) phase += stride_;
    return inv_contact_ + (inv_airborne_ - inv_contact_) * airborne_fraction(phase);
  }

private:
  static double edge(double u) { return 0.5 * (1.0 - std::cos(std::numbers::pi * u)); }

  double airborne_fraction(double phase) const {
    if (phase < rise_) return 1.0 - edge(phase / rise_);
    if (phase < contact_len_) return 0.0;
    if (phase < contact_len_ + rise_) return edge((phase - contact_len_) / rise_);
    return 1.0;
  }

  double inv_contact_, inv_airborne_, stride_, contact_len_, rise_, first_contact_;
};

namespace detail {

inline std::size_t grid_size(double duration, double sample_rate) {
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  if (n < 3) throw ValidationError("duration too short: need at least 3 grid points");
  return n;
}

// Evaluates induced current on the interior of a uniform grid; the two
// boundary points only feed the central difference.
inline std::vector<double> sample_interior(const CapacitanceModel& model, const Trajectory& traj,
                                           const ElectrodeModel& electrode, double k_prop, std::size_t n,
                                           double sample_rate) {
  const double h = 1.0 / sample_rate;
  const DifferenceStencil stencil{h, 0.0, static_cast<double>(n - 1) * h};
  const TimeFunction foot = [&](double t) { return foot_motion_current(model, t, k_prop, stencil); };
  std::vector<double> out(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i - 1] = induced_current(traj, electrode, foot, static_cast<double>(i) * h);
  }
  return out;
}

inline void add_noise(std::vector<double>& samples, double noise_std, Rng& rng) {
  if (noise_std == 0.0) return;
  std::normal_distribution<double> normal(0.0, noise_std);
  for (double& s : samples) s += normal(rng);
}

}  // namespace detail

/// Synthesizes a walk past the plant. The first-contact phase of the stride is
/// drawn from `seed`, as is the additive white Gaussian noise.
inline SignalRecord synth_walk(const GaitProfile& gait, const std::optional<MoodProfile>& mood,
                               const Trajectory& traj, const CapacitanceParams& cap,
                               const ElectrodeModel& electrode, double duration, double noise_std,
                               std::uint64_t seed, RecordLabels labels = {}) {
  gait.validate();
  if (mood) mood->validate();
  cap.validate();
  electrode.validate();
  if (!(duration > 0.0)) throw ValidationError("duration must be > 0");
  if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");

  const GaitProfile effective = apply_mood(gait, mood);
  const double stride = 2.0 / effective.step_frequency;

  double inv_contact = 1.0 / cap.foot_contact;
  double inv_airborne = inv_contact + effective.vertical_amplitude * (1.0 / cap.foot_airborne - inv_contact);
  if (effective.contact_charge_sign > 0) std::swap(inv_contact, inv_airborne);
  if (!(inv_contact > 0.0 && inv_airborne > 0.0))
    throw ValidationError("vertical amplitude drives a foot capacitance non-positive");

  Rng rng(seed);
  const double first_contact = uniform(rng, 0.0, stride);
  const FootWaveform left(inv_contact, inv_airborne, stride, effective.duty_cycle, cap.rise_time, first_contact);
  const FootWaveform right(inv_contact, inv_airborne, stride, effective.duty_cycle, cap.rise_time,
                           first_contact + 0.5 * stride);

  CapacitanceModel model;
  model.c_f1 = [left](double t) { return 1.0 / left.reciprocal(t); };
  model.c_f2 = [right](double t) { return 1.0 / right.reciprocal(t); };
  for (double c : cap.room) model.c_room.push_back(constant(c));
  model.c_plant = cap.plant;

  const std::size_t n = detail::grid_size(duration, kDefaultSampleRate);
  SignalRecord record;
  record.samples = detail::sample_interior(model, traj, electrode, cap.k_prop, n, kDefaultSampleRate);
  detail::add_noise(record.samples, noise_std, rng);

  record.sample_rate = kDefaultSampleRate;
  labels.activity = "walk";
  labels.mood = mood ? to_string(mood->label) : "neutral";
  record.labels = std::move(labels);
  record.seed = seed;
  record.generator_params = {
      {"generator", "synth_walk"},
      {"step_frequency", effective.step_frequency},
      {"walking_speed", effective.walking_speed},
      {"vertical_amplitude", effective.vertical_amplitude},
      {"duty_cycle", effective.duty_cycle},
      {"first_contact", first_contact},
      {"duration", duration},
      {"noise_std", noise_std},
      {"capacitance", cap.to_json()},
      {"electrode", {{"epsilon", electrode.epsilon}, {"area_s", electrode.area_s}}},
  };
  return record;
}

/// Straight walking path; `start` and `end` are signed x positions (metres)
/// along a line at lateral offset `lateral` from the plant.
struct WalkPath {
  double start = 4.0;
  double end = 0.8;
  double lateral = 0.5;

  double length() const { return std::abs(end - start); }
};

/// Trajectory and duration for walking `path` at `speed`.
inline std::pair<Trajectory, double> walk_along(const WalkPath& path, double speed) {
  if (!(speed > 0.0)) throw ValidationError("walking speed must be > 0");
  if (!(path.length() > 0.0)) throw ValidationError("walk path has zero length");
  if (path.lateral == 0.0 && ((path.start <= 0.0) != (path.end <= 0.0) || path.start == 0.0 || path.end == 0.0))
    throw ValidationError("walk path passes through the plant electrode");
  const double velocity = path.end > path.start ? speed : -speed;
  return {Trajectory::straight(path.start, velocity, path.lateral), path.length() / speed};
}

/// Seated subject, stationary relative to the plant.
struct ShakePose {
  double x = 0.6;
  double y = 0.4;
  double depth = 0.25;  // fraction of the contact/airborne swing reached by the shaking foot
};

/// Peak amplitude of the noise-free leg-shake current (same units as samples).
inline double legshake_amplitude(double shake_frequency, const CapacitanceParams& cap,
                                 const ElectrodeModel& electrode, const ShakePose& pose = {}) {
  const double swing = pose.depth * (1.0 / cap.foot_airborne - 1.0 / cap.foot_contact);
  const double r = std::hypot(pose.x, pose.y);
  return electrode.epsilon * electrode.area_s / r * cap.k_prop * cap.plant * std::abs(swing) *
         std::numbers::pi * shake_frequency;
}

/// Seated leg shaking from `onset` on: one foot's 1/C_f oscillates
/// sinusoidally at `shake_frequency`; the distance terms stay constant.
inline SignalRecord synth_legshake(double shake_frequency, double duration, double onset,
                                   const CapacitanceParams& cap, const ElectrodeModel& electrode,
                                   double noise_std, std::uint64_t seed, const ShakePose& pose = {},
                                   RecordLabels labels = {}) {
  if (!(shake_frequency >= 3.0 && shake_frequency <= 10.0))
    throw ValidationError("shake_frequency must be in [3, 10] Hz");
  if (!(duration > 0.0)) throw ValidationError("duration must be > 0");
  if (!(onset >= 0.0 && onset < duration)) throw ValidationError("onset must satisfy 0 <= onset < duration");
  if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
  if (!(pose.depth >= 0.0 && pose.depth <= 1.0)) throw ValidationError("shake depth must be in [0, 1]");
  cap.validate();
  electrode.validate();

  const double inv_rest = 1.0 / cap.foot_contact;
  const double swing = pose.depth * (1.0 / cap.foot_airborne - inv_rest);
  const double omega = 2.0 * std::numbers::pi * shake_frequency;

  CapacitanceModel model;
  model.c_f1 = [=](double t) {
    const double lift = t < onset ? 0.0 : 0.5 * (1.0 - std::cos(omega * (t - onset)));
    return 1.0 / (inv_rest + swing * lift);
  };
  model.c_f2 = constant(cap.foot_contact);
  for (double c : cap.room) model.c_room.push_back(constant(c));
  model.c_plant = cap.plant;

  const std::size_t n = detail::grid_size(duration, kDefaultSampleRate);
  SignalRecord record;
  record.samples = detail::sample_interior(model, Trajectory::fixed(pose.x, pose.y), electrode, cap.k_prop, n,
                                           kDefaultSampleRate);
  Rng rng(seed);
  detail::add_noise(record.samples, noise_std, rng);

  record.sample_rate = kDefaultSampleRate;
  if (labels.activity == "walk") labels.activity = "legshake";  // callers label noise-only records "idle"
  record.labels = std::move(labels);
  record.seed = seed;
  record.generator_params = {
      {"generator", "synth_legshake"},
      {"shake_frequency", shake_frequency},
      {"onset", onset},
      {"duration", duration},
      {"noise_std", noise_std},
      {"pose", {{"x", pose.x}, {"y", pose.y}, {"depth", pose.depth}}},
      {"capacitance", cap.to_json()},
      {"electrode", {{"epsilon", electrode.epsilon}, {"area_s", electrode.area_s}}},
  };
  return record;
}

}  // namespace esdgait::simkit
