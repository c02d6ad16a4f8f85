#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dnpvi {

/// Boundary part a facet belongs to: u = u_D (Dirichlet), prescribed flux g
/// (Neumann), or the sign constraint with complementary flux (Unilateral).
enum class BoundaryTag { Dirichlet = 1, Neumann = 2, Unilateral = 3 };

[[nodiscard]] std::string_view tag_name(BoundaryTag tag) noexcept;

using Point = std::array<double, 2>;

struct BoundaryFacet {
    std::array<int, 2> nodes{};  // only nodes[0] is used in 1D
    BoundaryTag tag = BoundaryTag::Dirichlet;
    int element = -1;
    std::string label;  // side name ("left", "top", ...) or file label
};

/// Conforming simplicial mesh: intervals in 1D, counter-clockwise triangles
/// in 2D. Immutable after construction.
class Mesh {
public:
    Mesh(int dim, std::vector<Point> nodes, std::vector<std::array<int, 3>> elements,
         std::vector<BoundaryFacet> facets);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int nodes_per_element() const noexcept { return dim_ + 1; }
    [[nodiscard]] int nodes_per_facet() const noexcept { return dim_; }
    [[nodiscard]] std::size_t num_nodes() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t num_elements() const noexcept { return elements_.size(); }

    [[nodiscard]] const std::vector<Point>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const Point& node(std::size_t i) const { return nodes_[i]; }
    [[nodiscard]] const std::vector<std::array<int, 3>>& elements() const noexcept { return elements_; }
    [[nodiscard]] const std::vector<BoundaryFacet>& facets() const noexcept { return facets_; }

    /// Length (1D) or area (2D) of element e; strictly positive.
    [[nodiscard]] double element_volume(std::size_t e) const { return volumes_[e]; }
    [[nodiscard]] double total_volume() const noexcept;
    /// Facet length in 2D, 1 for an endpoint in 1D.
    [[nodiscard]] double facet_measure(std::size_t f) const;

    /// Sum over elements of volume / nodes_per_element, per node.
    [[nodiscard]] const std::vector<double>& lumped_weights() const noexcept { return lumped_; }

    /// Nodes touched by at least one facet with the given tag, ascending.
    [[nodiscard]] std::vector<int> tagged_nodes(BoundaryTag tag) const;

    /// Gradients of the element's barycentric basis functions, one per local node.
    [[nodiscard]] std::array<Point, 3> basis_gradients(std::size_t e) const;

private:
    int dim_;
    std::vector<Point> nodes_;
    std::vector<std::array<int, 3>> elements_;
    std::vector<BoundaryFacet> facets_;
    std::vector<double> volumes_;
    std::vector<double> lumped_;
};

/// Nodes at i/n on [0,1]; endpoint facets labelled "left"/"right".
[[nodiscard]] Mesh unit_interval_mesh(int n, BoundaryTag left, BoundaryTag right);

/// Side labels of the unit square: "left", "right", "bottom", "top".
using SideTags = std::map<std::string, BoundaryTag, std::less<>>;

/// Diagonal triangulation of [0,1]^2 with (nx+1)(ny+1) nodes and 2*nx*ny
/// triangles of area 1/(2 nx ny). Every side must appear in `tags`.
[[nodiscard]] Mesh unit_square_mesh(int nx, int ny, const SideTags& tags);

/// Sum of facet measures carrying `tag`; 0 if no facet has it.
[[nodiscard]] double boundary_measure(const Mesh& mesh, BoundaryTag tag);

/// Reads the NODES / ELEMENTS / FACETS text format. Facet labels are mapped
/// to tags through `labels`; an unmapped label is an error.
[[nodiscard]] Mesh read_mesh(std::string_view text, const SideTags& labels);
[[nodiscard]] Mesh load_mesh(const std::filesystem::path& path, const SideTags& labels);

}  // namespace dnpvi
