// Segmentation quality: region similarity J (IoU), contour score F
// (boundary-matching F-measure with a small distance tolerance), and their
// mean G.
#pragma once

#include <iosfwd>

#include "ctvos/videogen.hpp"

namespace ctvos {

// |a ∩ b| / |a ∪ b|; 1 when both masks are empty.
double j_measure(const BinMask& pred, const BinMask& gt);

// Boundary pixels are foreground pixels with a 4-neighbor in the background
// (or on the frame edge). tolerance_radius < 0 selects the default of 0.8%
// of the frame diagonal, rounded up.
double f_measure(const BinMask& pred, const BinMask& gt, int tolerance_radius = -1);

BinMask boundary_of(const BinMask& mask);
int default_boundary_tolerance(int h, int w);

struct EvalRow {
    std::string sequence;
    int object = 0;
    double j = 0, f = 0;
    double g() const { return (j + f) / 2; }
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double j_mean = 0, f_mean = 0;
    double g() const { return (j_mean + f_mean) / 2; }
};

// Frame 0 carries the given mask and is excluded from scoring.
EvalReport evaluate_sequence(const std::string& sequence_id, const std::vector<IndexMask>& pred,
                             const std::vector<IndexMask>& gt);

EvalReport combine_reports(const std::vector<EvalReport>& reports);

// Tab-separated rows (sequence, object, J, F, G) plus a trailing MEAN row.
void write_report_tsv(std::ostream& os, const EvalReport& report);

}  // namespace ctvos
