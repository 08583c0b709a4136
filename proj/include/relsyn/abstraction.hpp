#pragma once

#include <vector>

#include "relsyn/box.hpp"
#include "relsyn/gmdp.hpp"
#include "relsyn/measures.hpp"
#include "relsyn/relations.hpp"

namespace relsyn {

// Uniform rectangular grid over a bounded domain plus a finite input menu.
// Flat cell indices use mixed radix with the last dimension fastest.
struct GridSpec {
    Box domain;
    std::vector<int> cells;
    std::vector<std::vector<double>> input_levels;

    int total_cells() const;
    std::vector<int> decode(int flat_index) const;
    int encode(const std::vector<int>& idx) const;
    Box cell_box(int flat_index) const;
    std::vector<double> representative(int flat_index) const;  // cell center
    std::vector<double> half_widths() const;
    int locate(const std::vector<double>& x) const;  // -1 when outside the domain

    // Uniform per-dimension levels including the interval endpoints, expanded
    // as a product over input dimensions.
    static std::vector<std::vector<double>> uniform_levels(const Box& input_space, int per_dim);
};

// Next-cell distribution of one coordinate given the cells of the coordinates
// its mean depends on. mass is indexed [input][dep_joint][next], next fastest.
struct DimKernel {
    int dim = 0;
    std::vector<int> deps;  // ascending state dimensions feeding the mean
    int dep_count = 1;
    int next_count = 0;
    std::vector<double> mass;

    double at(int input, int dep_joint, int next) const {
        return mass[(static_cast<size_t>(input) * dep_count + dep_joint) * next_count + next];
    }
};

// Finite sub-probability model of a nominal model on a grid. Rows factor into
// per-dimension kernels because the noise is diagonal and the drift linear;
// the missing row mass is exactly the domain-exit probability.
struct FiniteAbstraction {
    GridSpec grid;
    std::vector<DimKernel> kernels;
    std::vector<double> cell_radius;
    Matrix output_map;
    std::vector<double> output_weights;
    Box initial_set;
    SimRelationCert cert;

    int num_states() const { return grid.total_cells(); }
    int num_inputs() const { return static_cast<int>(grid.input_levels.size()); }
    std::vector<double> representative(int cell) const { return grid.representative(cell); }
    std::vector<double> row(int cell, int input) const;  // dense; small grids only
    double row_mass(int cell, int input) const;
    FiniteGmdp to_finite(int max_states = 4096) const;
};

FiniteAbstraction build_abstraction(const GmdpModel& nominal, const GridSpec& grid);

// Certifies the grid against the nominal model: epsilon is the worst output
// deviation between a cell point and its representative, delta the coupling
// deficiency of the drift deviation hull across a cell.
SimRelationCert discretization_certificate(const GmdpModel& nominal, const FiniteAbstraction& fab,
                                           NormMode mode = NormMode::weighted);

}  // namespace relsyn
