#include "rrdncnn/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rrdncnn {

std::string RDCurve::validate() const {
    if (points.size() < 4) return "curve '" + label + "' has fewer than 4 points";
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].bitrate <= 0.0) return "curve '" + label + "' has non-positive bitrate";
        if (i > 0 && points[i].bitrate <= points[i - 1].bitrate)
            return "curve '" + label + "' bitrates are not strictly increasing";
    }
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].psnr < points[i - 1].psnr)
            return "warning: curve '" + label + "' PSNR decreases with bitrate";
    return "";
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double psnr(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
            int w, int h) {
    const std::size_t total = static_cast<std::size_t>(w) * h;
    if (a.size() != total || b.size() != total)
        throw DimensionError("psnr: plane size does not match extents");
    std::uint64_t ssd = 0;
    for (std::size_t k = 0; k < total; ++k) {
        const int d = static_cast<int>(a[k]) - static_cast<int>(b[k]);
        ssd += static_cast<std::uint64_t>(d * d);
    }
    return psnr_from_mse(static_cast<double>(ssd) / static_cast<double>(total));
}

namespace {

constexpr int kWin = 11;
constexpr int kHalfWin = kWin / 2;

std::array<double, kWin * kWin> gaussian_window() {
    std::array<double, kWin * kWin> w{};
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x) {
            const double dy = y - kHalfWin, dx = x - kHalfWin;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            w[y * kWin + x] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;
    return w;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

double ssim(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
            int w, int h) {
    const std::size_t total = static_cast<std::size_t>(w) * h;
    if (a.size() != total || b.size() != total)
        throw DimensionError("ssim: plane size does not match extents");
    if (w < kWin || h < kWin)
        throw DimensionError("ssim: plane must be at least 11x11");

    static const std::array<double, kWin * kWin> win = gaussian_window();
    constexpr double C1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double C2 = (0.03 * 255.0) * (0.03 * 255.0);

    // separable pass is possible but the borders clamp, so the straightforward
    // windowed form is kept; the hot loops are pure double sums
    double acc = 0.0;
    for (int cy = 0; cy < h; ++cy) {
        for (int cx = 0; cx < w; ++cx) {
            double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int t = 0; t < kWin * kWin; ++t) {
                const int yy = clampi(cy + t / kWin - kHalfWin, 0, h - 1);
                const int xx = clampi(cx + t % kWin - kHalfWin, 0, w - 1);
                const double va = a[static_cast<std::size_t>(yy) * w + xx];
                const double vb = b[static_cast<std::size_t>(yy) * w + xx];
                const double wt = win[t];
                ma += wt * va;
                mb += wt * vb;
                saa += wt * va * va;
                sbb += wt * vb * vb;
                sab += wt * va * vb;
            }
            const double var_a = saa - ma * ma;
            const double var_b = sbb - mb * mb;
            const double cov = sab - ma * mb;
            acc += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) /
                   ((ma * ma + mb * mb + C1) * (var_a + var_b + C2));
        }
    }
    return acc / static_cast<double>(total);
}

namespace {

// Least-squares cubic fit y(x) via normal equations, double precision.
std::array<double, 4> cubic_fit(const std::vector<double>& x, const std::vector<double>& y) {
    double m[4][5] = {};
    for (std::size_t k = 0; k < x.size(); ++k) {
        double px[7] = {1, 0, 0, 0, 0, 0, 0};
        for (int i = 1; i < 7; ++i) px[i] = px[i - 1] * x[k];
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) m[r][c] += px[r + c];
            m[r][4] += px[r] * y[k];
        }
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-12)
            throw ConfigError("bd_rate: degenerate fit (repeated PSNR values?)");
        std::swap(m[col], m[piv]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]};
}

double integrate_cubic(const std::array<double, 4>& c, double lo, double hi) {
    auto anti = [&](double x) {
        return ((c[3] / 4.0 * x + c[2] / 3.0) * x + c[1] / 2.0) * x * x + c[0] * x;
    };
    return anti(hi) - anti(lo);
}

}  // namespace

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
    for (const RDCurve* c : {&anchor, &test}) {
        const std::string msg = c->validate();
        if (!msg.empty() && msg.rfind("warning:", 0) != 0) throw ConfigError("bd_rate: " + msg);
    }

    auto fit_curve = [](const RDCurve& c) {
        std::vector<double> p, lr;
        for (const RDPoint& pt : c.points) {
            p.push_back(pt.psnr);
            lr.push_back(std::log10(pt.bitrate));
        }
        return cubic_fit(p, lr);
    };
    const std::array<double, 4> ca = fit_curve(anchor);
    const std::array<double, 4> ct = fit_curve(test);

    auto minmax_psnr = [](const RDCurve& c) {
        double lo = c.points.front().psnr, hi = lo;
        for (const RDPoint& pt : c.points) {
            lo = std::min(lo, pt.psnr);
            hi = std::max(hi, pt.psnr);
        }
        return std::pair<double, double>(lo, hi);
    };
    const auto [alo, ahi] = minmax_psnr(anchor);
    const auto [tlo, thi] = minmax_psnr(test);
    const double lo = std::max(alo, tlo), hi = std::min(ahi, thi);
    if (hi <= lo) throw ConfigError("bd_rate: PSNR ranges of the curves do not overlap");

    const double avg = (integrate_cubic(ct, lo, hi) - integrate_cubic(ca, lo, hi)) / (hi - lo);
    return (std::pow(10.0, avg) - 1.0) * 100.0;
}

void emit_rd_csv(const std::vector<RDCurve>& curves, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw IoError("emit_rd_csv: cannot open '" + tmp + "'");
        f << "label,qp,bitrate_kbps,psnr_db\n";
        char buf[128];
        for (const RDCurve& c : curves)
            for (const RDPoint& p : c.points) {
                std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f\n", c.label.c_str(), p.qp,
                              p.bitrate, p.psnr);
                f << buf;
            }
        if (!f) throw IoError("emit_rd_csv: short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("emit_rd_csv: cannot rename '" + tmp + "' to '" + path + "'");
}

std::vector<RDCurve> parse_rd_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("parse_rd_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw FormatError("parse_rd_csv: empty file '" + path + "'");
    std::vector<RDCurve> curves;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string label, qp_s, rate_s, psnr_s;
        if (!std::getline(ss, label, ',') || !std::getline(ss, qp_s, ',') ||
            !std::getline(ss, rate_s, ',') || !std::getline(ss, psnr_s))
            throw FormatError("parse_rd_csv: malformed row '" + line + "'");
        RDPoint p;
        try {
            p.qp = std::stoi(qp_s);
            p.bitrate = std::stod(rate_s);
            p.psnr = std::stod(psnr_s);
        } catch (const std::exception&) {
            throw FormatError("parse_rd_csv: malformed row '" + line + "'");
        }
        if (curves.empty() || curves.back().label != label) {
            curves.push_back(RDCurve{label, {}});
        }
        curves.back().points.push_back(p);
    }
    return curves;
}

}  // namespace rrdncnn
