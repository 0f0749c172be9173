#include "dlcz/report.hpp"

#include "dlcz/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace dlcz::report {

namespace {

constexpr double kPanelW = 440, kPanelH = 320;
constexpr double kLeft = 72, kRight = 18, kTop = 34, kBottom = 52;
constexpr double kTitleH = 34;

std::string esc(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

std::string tick_label(double v) {
  if (v == 0.0)
    return "0";
  return fmt::format("{:.3g}", v);
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  bool valid() const { return lo <= hi; }
};

// Axis in transformed (possibly log10) coordinates.
struct Axis {
  bool log = false;
  double lo = 0, hi = 1;

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double tr(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (tr(v) - lo) / (hi - lo); }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(lo - 1e-9); e <= hi + 1e-9; e += 1.0)
        out.push_back(std::pow(10.0, e));
      if (out.size() < 2) {
        for (double e = std::floor(lo); e <= hi + 1.0; e += 1.0)
          for (double m : {2.0, 5.0}) {
            const double v = m * std::pow(10.0, e);
            if (std::log10(v) >= lo && std::log10(v) <= hi)
              out.push_back(v);
          }
        std::sort(out.begin(), out.end());
      }
      return out;
    }
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return out;
  }
};

Axis make_axis(const Range &r, bool log) {
  Axis a;
  a.log = log;
  if (!r.valid()) {
    a.lo = log ? -1 : 0;
    a.hi = log ? 0 : 1;
    return a;
  }
  double lo = log ? std::log10(r.lo) : r.lo;
  double hi = log ? std::log10(r.hi) : r.hi;
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    const double pad = log ? 0.5 : std::max(std::abs(hi) * 0.1, 1e-12);
    lo -= pad;
    hi += pad;
  }
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

void render_panel(std::string &out, const Panel &p, double x0, double y0) {
  Range rx, ry;
  Axis probe_x{p.log_x}, probe_y{p.log_y};
  for (const auto &s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!probe_x.usable(s.x[i]) || !probe_y.usable(s.y[i]))
        continue;
      rx.add(s.x[i]);
      const double e = i < s.yerr.size() && std::isfinite(s.yerr[i]) ? s.yerr[i] : 0.0;
      for (double v : {s.y[i] - e, s.y[i], s.y[i] + e})
        if (probe_y.usable(v))
          ry.add(v);
    }
  const Axis ax = make_axis(rx, p.log_x), ay = make_axis(ry, p.log_y);
  const double pw = kPanelW - kLeft - kRight, ph = kPanelH - kTop - kBottom;
  const double left = x0 + kLeft, top = y0 + kTop;
  auto px = [&](double v) { return left + ax.frac(v) * pw; };
  auto py = [&](double v) { return top + (1.0 - ay.frac(v)) * ph; };

  out += fmt::format("<g>\n<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
                     num(left + pw / 2), num(y0 + 20), esc(p.title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
                     "stroke=\"#000\"/>\n",
                     num(left), num(top), num(pw), num(ph));
  for (double t : ax.ticks()) {
    const double x = px(t);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000\"/>"
                       "<text x=\"{0}\" y=\"{3}\" font-size=\"10\" text-anchor=\"middle\">{4}</text>\n",
                       num(x), num(top + ph), num(top + ph - 5), num(top + ph + 14), tick_label(t));
  }
  for (double t : ay.ticks()) {
    const double y = py(t);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000\"/>"
                       "<text x=\"{3}\" y=\"{4}\" font-size=\"10\" text-anchor=\"end\">{5}</text>\n",
                       num(left), num(y), num(left + 5), num(left - 4), num(y + 3), tick_label(t));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                     num(left + pw / 2), num(top + ph + 34), esc(p.xlabel));
  out += fmt::format("<text x=\"{0}\" y=\"{1}\" font-size=\"11\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 {0} {1})\">{2}</text>\n",
                     num(x0 + 16), num(top + ph / 2), esc(p.ylabel));

  out += fmt::format("<clipPath id=\"c{0}_{1}\"><rect x=\"{2}\" y=\"{3}\" width=\"{4}\" "
                     "height=\"{5}\"/></clipPath>\n<g clip-path=\"url(#c{0}_{1})\">\n",
                     static_cast<long>(x0), static_cast<long>(y0), num(left), num(top), num(pw),
                     num(ph));
  for (const auto &s : p.series) {
    if (s.style == Series::Style::line) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (ax.usable(s.x[i]) && ay.usable(s.y[i]))
          pts += fmt::format("{}{},{}", pts.empty() ? "" : " ", num(px(s.x[i])), num(py(s.y[i])));
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                         s.color, pts);
      continue;
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i]))
        continue;
      const double x = px(s.x[i]), y = py(s.y[i]);
      if (i < s.yerr.size() && std::isfinite(s.yerr[i]) && s.yerr[i] > 0.0) {
        const double lo = s.y[i] - s.yerr[i];
        const double y_lo = ay.usable(lo) ? py(lo) : top + ph;
        out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\"/>",
                           num(x), num(y_lo), num(py(s.y[i] + s.yerr[i])), s.color);
      }
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\"/>\n", num(x), num(y),
                         s.color);
    }
  }
  out += "</g>\n";

  double ly = top + 14;
  for (const auto &s : p.series) {
    if (s.label.empty())
      continue;
    const double lx = left + pw - 120;
    if (s.style == Series::Style::line)
      out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                         num(lx), num(ly - 4), num(lx + 14), num(ly - 4), s.color);
    else
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\"/>", num(lx + 7),
                         num(ly - 4), s.color);
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", num(lx + 18),
                       num(ly), esc(s.label));
    ly += 14;
  }
  double ny = top + 14;
  for (const auto &n : p.notes) {
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", num(left + 8),
                       num(ny), esc(n));
    ny += 13;
  }
  out += "</g>\n";
}

// Sorted copy of a series by x.
Series sorted(Series s) {
  std::vector<std::size_t> idx(s.x.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.x[a] < s.x[b]; });
  Series out = s;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.x[i] = s.x[idx[i]];
    out.y[i] = s.y[idx[i]];
    if (!s.yerr.empty())
      out.yerr[i] = s.yerr[idx[i]];
  }
  return out;
}

const std::vector<std::string> kEstimates{"p1", "p2", "p12", "p122", "pc", "pcc", "g2c", "g12"};

Estimate stat_of(const stats::CoincidenceStats &s, std::string_view name) {
  if (name == "p1") return s.p1();
  if (name == "p2") return s.p2();
  if (name == "p12") return s.p12();
  if (name == "p122") return s.p122();
  if (name == "pc") return s.pc();
  if (name == "pcc") return s.pcc();
  if (name == "g2c") return s.g2c();
  return s.g12();
}

double meta_or_nan(const io::EventMetadata &m, const std::string &key) {
  return m.has(key) ? m.number(key) : std::numeric_limits<double>::quiet_NaN();
}

std::string table_text(const io::Table &t) {
  std::ostringstream ss;
  io::write_table(ss, t);
  return ss.str();
}

bool varies(const std::vector<double> &v) {
  std::set<double> s;
  for (double x : v)
    if (std::isfinite(x))
      s.insert(x);
  return s.size() >= 2;
}

void threshold_figure(const io::Table &a, FileSet &files) {
  const auto od = a.values("od");
  const auto pc = a.values("pc"), pce = a.values("pc_err");
  const auto p2 = a.values("p2"), p2e = a.values("p2_err");
  std::vector<fit::ThresholdPoint> pts;
  for (std::size_t i = 0; i < od.size(); ++i)
    pts.push_back({od[i], {pc[i], pce[i], std::isfinite(pc[i])}, {p2[i], p2e[i], true}});

  io::Table t;
  t.kind = "threshold";
  t.columns = {"od", "pc", "pc_err", "p2", "p2_err", "delta_pc", "delta_pc_err", "g12",
               "in_fit"};
  const auto window = fit::threshold_window(pts);
  std::optional<fit::ScalingFit> sf;
  try {
    sf = fit::fit_threshold_slope(pts);
  } catch (const DataError &) {
  }
  Series spc{"P_c", {}, {}, {}, Series::Style::points, "#1f77b4"};
  Series sp2{"P_2", {}, {}, {}, Series::Style::points, "#d62728"};
  Series sd{"P_c - P_2", {}, {}, {}, Series::Style::points, "#1f77b4"};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = pc[i] - p2[i];
    const double de = std::hypot(pce[i], p2e[i]);
    const bool in = std::find(window.begin(), window.end(), i) != window.end();
    t.rows.push_back({od[i], pc[i], pce[i], p2[i], p2e[i], d, de, pc[i] / p2[i], in ? 1.0 : 0.0});
    spc.x.push_back(od[i]); spc.y.push_back(pc[i]); spc.yerr.push_back(pce[i]);
    sp2.x.push_back(od[i]); sp2.y.push_back(p2[i]); sp2.yerr.push_back(p2e[i]);
    sd.x.push_back(od[i]); sd.y.push_back(d); sd.yerr.push_back(de);
  }
  Panel main{"Conditional retrieval vs optical depth", "OD", "probability", false, true,
             {sorted(spc), sorted(sp2)}, {}};
  Panel inset{"Delta P_c vs OD", "OD", "P_c - P_2", true, true, {sorted(sd)}, {}};
  if (sf) {
    t.meta.values["slope"] = io::exact(sf->slope->value);
    t.meta.values["slope_err"] = io::exact(sf->slope->error);
    t.meta.values["log_amplitude"] = io::exact(sf->log_amplitude->value);
    Series line{fmt::format("s = {:.2f} +- {:.2f}", sf->slope->value, sf->slope->error),
                {}, {}, {}, Series::Style::line, "#2ca02c"};
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (auto i : sf->used) {
      lo = std::min(lo, od[i]);
      hi = std::max(hi, od[i]);
    }
    for (int k = 0; k <= 20; ++k) {
      const double x = lo * std::pow(hi / lo, k / 20.0);
      line.x.push_back(x);
      line.y.push_back(std::exp(sf->log_amplitude->value + sf->slope->value * std::log(x)));
    }
    inset.series.push_back(line);
  }
  if (sf && sf->od_threshold) {
    t.meta.values["od_threshold"] = io::exact(*sf->od_threshold);
    main.notes.push_back(fmt::format("G12 = 2 at OD = {:.3g}", *sf->od_threshold));
  }
  const Panel panels[] = {main, inset};
  files["threshold.svg"] = render_svg(panels, 2, "Threshold of quantum correlations");
  files["threshold.csv"] = table_text(t);
}

void regions_figure(const io::Table &a, FileSet &files) {
  const auto n = a.values("mean_excitation");
  const auto p1 = a.values("p1");
  const auto pc = a.values("pc"), pce = a.values("pc_err");
  const auto p2 = a.values("p2"), p2e = a.values("p2_err");
  const auto g = a.values("g2c"), ge = a.values("g2c_err");
  io::Table t;
  t.kind = "regions";
  t.columns = {"mean_excitation", "p1", "pc", "pc_err", "p2", "p2_err", "g2c", "g2c_err"};
  Series spc{"P_c", p1, pc, pce, Series::Style::points, "#1f77b4"};
  Series sp2{"P_2", p1, p2, p2e, Series::Style::points, "#d62728"};
  Series sg{"g2c", p1, g, ge, Series::Style::points, "#9467bd"};
  for (std::size_t i = 0; i < n.size(); ++i)
    t.rows.push_back({n[i], p1[i], pc[i], pce[i], p2[i], p2e[i], g[i], ge[i]});
  const Panel panels[] = {
      {"Conditional probability vs P_1", "P_1", "probability", true, true,
       {sorted(spc), sorted(sp2)}, {}},
      {"Conditional autocorrelation", "P_1", "g2c", true, false, {sorted(sg)}, {}}};
  files["regions.svg"] = render_svg(panels, 2, "Single-photon regime");
  files["regions.csv"] = table_text(t);
}

void delay_figure(const io::Table &a, FileSet &files) {
  auto d = a.values("delay_s");
  for (auto &v : d)
    v *= 1e9;
  const auto pc = a.values("pc"), pce = a.values("pc_err");
  const auto p2 = a.values("p2"), p2e = a.values("p2_err");
  const auto g = a.values("g12"), ge = a.values("g12_err");
  io::Table t;
  t.kind = "delay";
  t.columns = {"delay_ns", "pc", "pc_err", "p2", "p2_err", "g12", "g12_err"};
  for (std::size_t i = 0; i < d.size(); ++i)
    t.rows.push_back({d[i], pc[i], pce[i], p2[i], p2e[i], g[i], ge[i]});
  const Panel panels[] = {
      {"Retrieval vs write-read delay", "delay (ns)", "probability", false, false,
       {sorted({"P_c", d, pc, pce, Series::Style::points, "#1f77b4"}),
        sorted({"P_2", d, p2, p2e, Series::Style::points, "#d62728"})},
       {}},
      {"Cross-correlation vs delay", "delay (ns)", "G12", false, false,
       {sorted({"G12", d, g, ge, Series::Style::points, "#2ca02c"})}, {}}};
  files["delay.svg"] = render_svg(panels, 2, "Memory decoherence");
  files["delay.csv"] = table_text(t);
}

struct FitRow {
  double od, power, chi, chi_err, alpha, alpha_err;
  physics::AtomSpec atom;
};

std::vector<FitRow> fit_rows(std::span<const io::Table> fits) {
  std::vector<FitRow> rows;
  for (const auto &f : fits) {
    const auto atom = f.meta.atom();
    const auto od = f.column("od"), pw = f.column("power_w"), c = f.column("chi"),
               ce = f.column("chi_err"), a = f.column("alpha"), ae = f.column("alpha_err");
    for (const auto &r : f.rows)
      rows.push_back({r[od], r[pw], r[c], r[ce], r[a], r[ae], atom});
  }
  return rows;
}

void wavepacket_figure(std::span<const io::Table> wps, const std::vector<FitRow> &fits,
                       FileSet &files) {
  io::Table t;
  t.kind = "wavepackets";
  t.columns = {"panel", "od", "power_w", "t_ns", "data", "data_err", "model", "chi", "alpha"};
  std::vector<Panel> panels;
  for (std::size_t k = 0; k < wps.size(); ++k) {
    const auto &w = wps[k];
    const double power = meta_or_nan(w.meta, "read_power_w");
    const double od = meta_or_nan(w.meta, "od");
    const auto wp = io::wavepacket_from_table(w);
    if (wp.n_coincident == 0)
      continue;
    const auto curve = fit::curve_from_wavepacket(wp, power, od);
    const FitRow *match = nullptr;
    for (const auto &f : fits)
      if (f.power == power && (f.od == od || (std::isnan(f.od) && std::isnan(od))))
        match = &f;
    Panel p;
    p.title = fmt::format("P = {:.3g} mW, OD = {:.3g}", power * 1e3, od);
    p.xlabel = "t (ns)";
    p.ylabel = "p_c(t) / P_c";
    Series data{"data", {}, {}, {}, Series::Style::points, "#1f77b4"};
    Series model{"theory", {}, {}, {}, Series::Style::line, "#d62728"};
    physics::ReadoutSpec ro;
    if (match) {
      ro.power = power;
      ro.alpha = match->alpha;
      ro.chi = match->chi;
      ro.dt = wp.bin_width;
      ro.read_duration = wp.read_duration;
      p.notes.push_back(fmt::format("chi = {:.3f} +- {:.3f}", match->chi, match->chi_err));
      p.notes.push_back(fmt::format("alpha = {:.3f} +- {:.3f}", match->alpha, match->alpha_err));
    }
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
      const double tn = curve.t[i] * 1e9;
      const double m = match ? physics::wavepacket_density(curve.t[i], ro, match->atom)
                             : std::numeric_limits<double>::quiet_NaN();
      data.x.push_back(tn);
      data.y.push_back(curve.y[i]);
      data.yerr.push_back(curve.sigma[i]);
      model.x.push_back(tn);
      model.y.push_back(m);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      t.rows.push_back({static_cast<double>(k), od, power, tn, curve.y[i], curve.sigma[i], m,
                        match ? match->chi : nan, match ? match->alpha : nan});
    }
    p.series.push_back(std::move(data));
    if (match)
      p.series.push_back(std::move(model));
    panels.push_back(std::move(p));
  }
  if (panels.empty())
    return;
  files["wavepackets.svg"] = render_svg(panels, 2, "Conditional wavepackets");
  files["wavepackets.csv"] = table_text(t);
}

void cooperativity_figure(const std::vector<FitRow> &fits, FileSet &files) {
  // One point per OD: the first fit row seen.
  std::vector<FitRow> pts;
  for (const auto &f : fits)
    if (std::isfinite(f.od) &&
        std::none_of(pts.begin(), pts.end(), [&](const FitRow &p) { return p.od == f.od; }))
      pts.push_back(f);
  if (pts.size() < 2)
    return;
  std::vector<fit::CooperativityPoint> cp;
  for (const auto &p : pts)
    cp.push_back({p.od, {p.chi, p.chi_err}});
  const auto sf = fit::fit_cooperativity(cp);
  const auto atom = pts.front().atom;

  io::Table t;
  t.kind = "cooperativity";
  t.meta.values["beta"] = io::exact(sf.beta->value);
  t.meta.values["beta_err"] = io::exact(sf.beta->error);
  t.meta.values["beta_theory"] = io::exact(physics::beta_theory(atom));
  t.columns = {"od", "chi", "chi_err", "alpha", "alpha_err", "tau_ns", "tau_err_ns"};
  Series sc{"fitted chi", {}, {}, {}, Series::Style::points, "#1f77b4"};
  Series sa{"fitted alpha", {}, {}, {}, Series::Style::points, "#9467bd"};
  Series st{"tau_sp", {}, {}, {}, Series::Style::points, "#1f77b4"};
  double od_max = 0.0;
  for (const auto &p : pts) {
    const double tau = physics::superradiant_decay_time(std::max(p.chi, 1.0), atom) * 1e9;
    const double tau_err = tau * p.chi_err / p.chi;
    t.rows.push_back({p.od, p.chi, p.chi_err, p.alpha, p.alpha_err, tau, tau_err});
    sc.x.push_back(p.od); sc.y.push_back(p.chi); sc.yerr.push_back(p.chi_err);
    sa.x.push_back(p.od); sa.y.push_back(p.alpha); sa.yerr.push_back(p.alpha_err);
    st.x.push_back(p.od); st.y.push_back(tau); st.yerr.push_back(tau_err);
    od_max = std::max(od_max, p.od);
  }
  Series line{fmt::format("1 + beta OD, beta = {:.3f} +- {:.3f}", sf.beta->value, sf.beta->error),
              {}, {}, {}, Series::Style::line, "#d62728"};
  Series tline{"fit", {}, {}, {}, Series::Style::line, "#d62728"};
  for (int k = 0; k <= 40; ++k) {
    const double x = od_max * 1.05 * k / 40.0;
    const double chi = 1.0 + sf.beta->value * x;
    line.x.push_back(x);
    line.y.push_back(chi);
    tline.x.push_back(x);
    tline.y.push_back(physics::superradiant_decay_time(std::max(chi, 1.0), atom) * 1e9);
  }
  const Panel panels[] = {
      {"Cooperativity vs OD", "OD", "chi", false, false, {sorted(sc), line}, {}},
      {"Rabi calibration vs OD", "OD", "alpha (mW^-1/2)", false, false, {sorted(sa)}, {}},
      {"Superradiant decay time", "OD", "tau_sp (ns)", false, false, {sorted(st), tline}, {}}};
  files["cooperativity.svg"] = render_svg(panels, 3, "Cooperativity scaling");
  files["cooperativity.csv"] = table_text(t);
}

} // namespace

std::string render_svg(std::span<const Panel> panels, std::size_t columns,
                       std::string_view title) {
  columns = std::max<std::size_t>(1, std::min(columns, std::max<std::size_t>(panels.size(), 1)));
  const std::size_t rows = (panels.size() + columns - 1) / columns;
  const double w = kPanelW * static_cast<double>(columns);
  const double h = kTitleH + kPanelH * static_cast<double>(std::max<std::size_t>(rows, 1));
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
      "<text x=\"{2}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
      num(w), num(h), num(w / 2), esc(title));
  for (std::size_t i = 0; i < panels.size(); ++i)
    render_panel(out, panels[i], kPanelW * static_cast<double>(i % columns),
                 kTitleH + kPanelH * static_cast<double>(i / columns));
  out += "</svg>\n";
  return out;
}

io::Table analysis_table(std::span<const AnalysisPoint> points) {
  io::Table t;
  t.kind = "analysis";
  t.columns = {"od", "power_w", "delay_s", "mean_excitation", "n_trials"};
  for (const auto &e : kEstimates) {
    t.columns.push_back(e);
    t.columns.push_back(e + "_err");
  }
  for (const auto &p : points) {
    std::vector<double> row{meta_or_nan(p.meta, "od"), meta_or_nan(p.meta, "read_power_w"),
                            meta_or_nan(p.meta, "write_read_delay_s"),
                            meta_or_nan(p.meta, "mean_excitation"),
                            static_cast<double>(p.stats.n_trials())};
    for (const auto &e : kEstimates) {
      const auto est = stat_of(p.stats, e);
      row.push_back(est.value);
      row.push_back(est.error);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

io::Table fit_table(std::span<const fit::WavepacketFit> fits,
                    std::span<const fit::CurveData> curves, const physics::AtomSpec &atom,
                    fit::FitMode mode) {
  io::Table t;
  t.kind = "fit";
  t.meta.values["mode"] = mode == fit::FitMode::global ? "global" : "per-curve";
  t.meta.values["gamma_rad_s"] = io::exact(atom.gamma);
  t.meta.values["wavelength_m"] = io::exact(atom.wavelength);
  t.meta.values["i_sat_w_m2"] = io::exact(atom.i_sat);
  t.columns = {"curve", "od", "power_w", "chi", "chi_err", "alpha", "alpha_err",
               "cov_chi_alpha", "chi2_red", "dof", "iterations", "converged", "window_bins"};
  for (std::size_t f = 0; f < fits.size(); ++f) {
    const auto &fit = fits[f];
    for (std::size_t j = 0; j < fit.curves.size(); ++j) {
      const auto &c = curves[fit.curves[j]];
      t.rows.push_back({static_cast<double>(fit.curves[j]), c.od, c.power, fit.chi.value,
                        fit.chi.error, fit.alpha.value, fit.alpha.error, fit.covariance(0, 1),
                        fit.chi_squared_reduced, static_cast<double>(fit.dof),
                        static_cast<double>(fit.iterations), fit.converged ? 1.0 : 0.0,
                        static_cast<double>(fit.window[j])});
    }
  }
  return t;
}

FileSet build_report(std::span<const io::Table> artifacts) {
  if (artifacts.empty())
    throw DataError("report needs at least one artifact");
  std::vector<io::Table> wps, fits;
  io::Table analysis;
  analysis.kind = "analysis";
  for (const auto &a : artifacts) {
    if (a.kind == "analysis") {
      if (analysis.columns.empty())
        analysis.columns = a.columns;
      else if (analysis.columns != a.columns)
        throw DataError("analysis tables have different columns");
      analysis.rows.insert(analysis.rows.end(), a.rows.begin(), a.rows.end());
    } else if (a.kind == "wavepacket") {
      wps.push_back(a);
    } else if (a.kind == "fit") {
      fits.push_back(a);
    } else {
      throw DataError("report cannot use a '" + a.kind + "' table");
    }
  }

  FileSet files;
  if (!analysis.rows.empty()) {
    if (varies(analysis.values("od")))
      threshold_figure(analysis, files);
    if (varies(analysis.values("mean_excitation")))
      regions_figure(analysis, files);
    if (varies(analysis.values("delay_s")))
      delay_figure(analysis, files);
  }
  const auto rows = fit_rows(fits);
  if (!wps.empty())
    wavepacket_figure(wps, rows, files);
  cooperativity_figure(rows, files);
  if (files.empty())
    throw DataError("artifacts hold nothing to plot (need a sweep, wavepackets or fits)");
  return files;
}

} // namespace dlcz::report
