#include "ctvos/metrics.hpp"

#include <cmath>
#include <ostream>

namespace ctvos {

namespace {

void check_dims(const BinMask& a, const BinMask& b, const char* op) {
    check(a.h == b.h && a.w == b.w, op, ": mask dimensions differ, ", a.h, "x", a.w, " vs ", b.h,
          "x", b.w);
}

// Marks every pixel within `radius` (Euclidean) of a set pixel.
BinMask dilate(const BinMask& mask, int radius) {
    if (radius <= 0) return mask;
    BinMask out(mask.h, mask.w);
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dy * dy + dx * dx <= radius * radius) offsets.emplace_back(dy, dx);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x)) continue;
            for (auto [dy, dx] : offsets) {
                int ny = y + dy, nx = x + dx;
                if (ny >= 0 && ny < mask.h && nx >= 0 && nx < mask.w) out.at(ny, nx) = 1;
            }
        }
    return out;
}

double matched_fraction(const BinMask& boundary, const BinMask& target_zone) {
    int64_t total = 0, hit = 0;
    for (size_t p = 0; p < boundary.v.size(); ++p) {
        if (!boundary.v[p]) continue;
        ++total;
        hit += target_zone.v[p];
    }
    return total == 0 ? 0.0 : double(hit) / double(total);
}

}  // namespace

double j_measure(const BinMask& pred, const BinMask& gt) {
    check_dims(pred, gt, "j_measure");
    int64_t inter = 0, uni = 0;
    for (size_t p = 0; p < pred.v.size(); ++p) {
        check(pred.v[p] <= 1 && gt.v[p] <= 1, "j_measure: non-binary mask");
        inter += pred.v[p] & gt.v[p];
        uni += pred.v[p] | gt.v[p];
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

BinMask boundary_of(const BinMask& mask) {
    BinMask out(mask.h, mask.w);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x)) continue;
            bool edge = y == 0 || y == mask.h - 1 || x == 0 || x == mask.w - 1;
            if (!edge)
                edge = !mask.at(y - 1, x) || !mask.at(y + 1, x) || !mask.at(y, x - 1) ||
                       !mask.at(y, x + 1);
            out.at(y, x) = edge ? 1 : 0;
        }
    return out;
}

int default_boundary_tolerance(int h, int w) {
    return int(std::ceil(0.008 * std::sqrt(double(h) * h + double(w) * w)));
}

double f_measure(const BinMask& pred, const BinMask& gt, int tolerance_radius) {
    check_dims(pred, gt, "f_measure");
    int radius = tolerance_radius >= 0 ? tolerance_radius
                                       : default_boundary_tolerance(pred.h, pred.w);
    BinMask pb = boundary_of(pred);
    BinMask gb = boundary_of(gt);
    bool pb_empty = pb.empty(), gb_empty = gb.empty();
    if (pb_empty && gb_empty) return 1.0;
    if (pb_empty || gb_empty) return 0.0;
    double precision = matched_fraction(pb, dilate(gb, radius));
    double recall = matched_fraction(gb, dilate(pb, radius));
    if (precision + recall == 0.0) return 0.0;
    return 2 * precision * recall / (precision + recall);
}

EvalReport evaluate_sequence(const std::string& sequence_id, const std::vector<IndexMask>& pred,
                             const std::vector<IndexMask>& gt) {
    check(pred.size() == gt.size(), "evaluate: ", pred.size(), " predictions vs ", gt.size(),
          " ground-truth frames");
    check(gt.size() >= 2, "evaluate: need at least 2 frames");
    int num_objects = 0;
    for (const auto& m : gt) num_objects = std::max(num_objects, m.max_index());
    check(num_objects >= 1, "evaluate: ground truth has no objects");

    EvalReport report;
    for (int obj = 1; obj <= num_objects; ++obj) {
        double j_sum = 0, f_sum = 0;
        int frames = 0;
        for (size_t t = 1; t < gt.size(); ++t) {  // first frame is given, not scored
            BinMask p = object_mask(pred[t], obj);
            BinMask g = object_mask(gt[t], obj);
            j_sum += j_measure(p, g);
            f_sum += f_measure(p, g);
            ++frames;
        }
        EvalRow row;
        row.sequence = sequence_id;
        row.object = obj;
        row.j = j_sum / frames;
        row.f = f_sum / frames;
        report.rows.push_back(row);
    }
    for (const auto& r : report.rows) {
        report.j_mean += r.j / report.rows.size();
        report.f_mean += r.f / report.rows.size();
    }
    return report;
}

EvalReport combine_reports(const std::vector<EvalReport>& reports) {
    EvalReport out;
    for (const auto& r : reports)
        out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    check(!out.rows.empty(), "combine: no evaluation rows");
    for (const auto& r : out.rows) {
        out.j_mean += r.j / out.rows.size();
        out.f_mean += r.f / out.rows.size();
    }
    return out;
}

void write_report_tsv(std::ostream& os, const EvalReport& report) {
    os << "sequence\tobject\tJ\tF\tG\n";
    os.precision(6);
    os << std::fixed;
    for (const auto& r : report.rows)
        os << r.sequence << '\t' << r.object << '\t' << r.j << '\t' << r.f << '\t' << r.g()
           << '\n';
    os << "MEAN\t-\t" << report.j_mean << '\t' << report.f_mean << '\t' << report.g() << '\n';
}

}  // namespace ctvos
