#include "dnpvi/mesh.hpp"

#include "dnpvi/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dnpvi {

std::string_view tag_name(BoundaryTag tag) noexcept {
    switch (tag) {
        case BoundaryTag::Dirichlet: return "gamma1";
        case BoundaryTag::Neumann: return "gamma2";
        case BoundaryTag::Unilateral: return "gamma3";
    }
    return "?";
}

namespace {

double signed_volume(int dim, const std::vector<Point>& nodes, const std::array<int, 3>& el) {
    const Point& a = nodes[static_cast<std::size_t>(el[0])];
    const Point& b = nodes[static_cast<std::size_t>(el[1])];
    if (dim == 1) return b[0] - a[0];
    const Point& c = nodes[static_cast<std::size_t>(el[2])];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

}  // namespace

Mesh::Mesh(int dim, std::vector<Point> nodes, std::vector<std::array<int, 3>> elements,
           std::vector<BoundaryFacet> facets)
    : dim_(dim), nodes_(std::move(nodes)), elements_(std::move(elements)), facets_(std::move(facets)) {
    if (dim_ != 1 && dim_ != 2) throw InvalidArgument(fmt::format("mesh: unsupported dimension {}", dim_));
    if (elements_.empty()) throw InvalidArgument("mesh: no elements");
    const int n_nodes = static_cast<int>(nodes_.size());
    const auto check_index = [&](int i) {
        if (i < 0 || i >= n_nodes) throw InvalidArgument(fmt::format("mesh: node index {} out of range", i));
    };

    volumes_.resize(elements_.size());
    lumped_.assign(nodes_.size(), 0.0);
    for (std::size_t e = 0; e < elements_.size(); ++e) {
        for (int k = 0; k < nodes_per_element(); ++k) check_index(elements_[e][static_cast<std::size_t>(k)]);
        const double vol = signed_volume(dim_, nodes_, elements_[e]);
        if (!(vol > 0.0)) {
            throw InvalidArgument(fmt::format("mesh: element {} has non-positive volume {}", e, vol));
        }
        volumes_[e] = vol;
        for (int k = 0; k < nodes_per_element(); ++k) {
            lumped_[static_cast<std::size_t>(elements_[e][static_cast<std::size_t>(k)])] +=
                vol / nodes_per_element();
        }
    }

    for (std::size_t f = 0; f < facets_.size(); ++f) {
        BoundaryFacet& facet = facets_[f];
        for (int k = 0; k < nodes_per_facet(); ++k) check_index(facet.nodes[static_cast<std::size_t>(k)]);
        int owner = -1;
        int count = 0;
        for (std::size_t e = 0; e < elements_.size(); ++e) {
            const auto begin = elements_[e].begin();
            const auto end = begin + nodes_per_element();
            bool contains = true;
            for (int k = 0; k < nodes_per_facet(); ++k) {
                contains = contains && std::find(begin, end, facet.nodes[static_cast<std::size_t>(k)]) != end;
            }
            if (contains) {
                owner = static_cast<int>(e);
                ++count;
            }
        }
        if (count != 1) {
            throw InvalidArgument(
                fmt::format("mesh: boundary facet {} belongs to {} elements (expected 1)", f, count));
        }
        facet.element = owner;
    }
}

double Mesh::total_volume() const noexcept { return std::accumulate(volumes_.begin(), volumes_.end(), 0.0); }

double Mesh::facet_measure(std::size_t f) const {
    if (dim_ == 1) return 1.0;
    const Point& a = nodes_[static_cast<std::size_t>(facets_[f].nodes[0])];
    const Point& b = nodes_[static_cast<std::size_t>(facets_[f].nodes[1])];
    return std::hypot(b[0] - a[0], b[1] - a[1]);
}

std::vector<int> Mesh::tagged_nodes(BoundaryTag tag) const {
    std::vector<int> out;
    for (const auto& facet : facets_) {
        if (facet.tag != tag) continue;
        for (int k = 0; k < nodes_per_facet(); ++k) out.push_back(facet.nodes[static_cast<std::size_t>(k)]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::array<Point, 3> Mesh::basis_gradients(std::size_t e) const {
    const auto& el = elements_[e];
    std::array<Point, 3> grads{};
    if (dim_ == 1) {
        const double h = volumes_[e];
        grads[0] = {-1.0 / h, 0.0};
        grads[1] = {1.0 / h, 0.0};
        return grads;
    }
    const Point& a = nodes_[static_cast<std::size_t>(el[0])];
    const Point& b = nodes_[static_cast<std::size_t>(el[1])];
    const Point& c = nodes_[static_cast<std::size_t>(el[2])];
    const double two_area = 2.0 * volumes_[e];
    grads[0] = {(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area};
    grads[1] = {(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area};
    grads[2] = {(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area};
    return grads;
}

Mesh unit_interval_mesh(int n, BoundaryTag left, BoundaryTag right) {
    if (n < 1) throw InvalidArgument("unit_interval_mesh: need at least one element");
    std::vector<Point> nodes(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) nodes[static_cast<std::size_t>(i)] = {static_cast<double>(i) / n, 0.0};
    std::vector<std::array<int, 3>> elements(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) elements[static_cast<std::size_t>(i)] = {i, i + 1, -1};
    std::vector<BoundaryFacet> facets = {
        BoundaryFacet{{0, -1}, left, -1, "left"},
        BoundaryFacet{{n, -1}, right, -1, "right"},
    };
    return Mesh(1, std::move(nodes), std::move(elements), std::move(facets));
}

Mesh unit_square_mesh(int nx, int ny, const SideTags& tags) {
    if (nx < 1 || ny < 1) throw InvalidArgument("unit_square_mesh: need at least one subdivision per side");
    for (const char* side : {"left", "right", "bottom", "top"}) {
        if (tags.find(side) == tags.end()) {
            throw InvalidArgument(fmt::format("unit_square_mesh: side '{}' is not tagged", side));
        }
    }
    const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<Point> nodes;
    nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            nodes.push_back({static_cast<double>(i) / nx, static_cast<double>(j) / ny});
        }
    }
    std::vector<std::array<int, 3>> elements;
    elements.reserve(static_cast<std::size_t>(2 * nx * ny));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    std::vector<BoundaryFacet> facets;
    const auto add = [&](int a, int b, const char* side) {
        facets.push_back(BoundaryFacet{{a, b}, tags.find(side)->second, -1, side});
    };
    for (int i = 0; i < nx; ++i) add(id(i, 0), id(i + 1, 0), "bottom");
    for (int j = 0; j < ny; ++j) add(id(nx, j), id(nx, j + 1), "right");
    for (int i = nx; i > 0; --i) add(id(i, ny), id(i - 1, ny), "top");
    for (int j = ny; j > 0; --j) add(id(0, j), id(0, j - 1), "left");
    return Mesh(2, std::move(nodes), std::move(elements), std::move(facets));
}

double boundary_measure(const Mesh& mesh, BoundaryTag tag) {
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.facets().size(); ++f) {
        if (mesh.facets()[f].tag == tag) total += mesh.facet_measure(f);
    }
    return total;
}

Mesh read_mesh(std::string_view text, const SideTags& labels) {
    enum class Section { None, Nodes, Elements, Facets } section = Section::None;
    std::vector<Point> nodes;
    std::vector<std::array<int, 3>> elements;
    std::vector<BoundaryFacet> facets;
    int dim = 0;

    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    const auto fail = [&](const std::string& msg) -> ParseError {
        return ParseError(fmt::format("mesh file line {}: {}", line_no, msg), line_no, 0);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream line(raw);
        std::vector<std::string> words;
        for (std::string w; line >> w;) words.push_back(w);
        if (words.empty()) continue;
        if (words.size() == 1 && (words[0] == "NODES" || words[0] == "ELEMENTS" || words[0] == "FACETS")) {
            section = words[0] == "NODES" ? Section::Nodes
                      : words[0] == "ELEMENTS" ? Section::Elements
                                               : Section::Facets;
            continue;
        }
        try {
            switch (section) {
                case Section::None: throw fail("data before any section header");
                case Section::Nodes: {
                    const int row_dim = static_cast<int>(words.size()) - 1;
                    if (row_dim != 1 && row_dim != 2) throw fail("expected 'index x [y]'");
                    if (dim == 0) dim = row_dim;
                    if (row_dim != dim) throw fail("inconsistent coordinate count");
                    if (std::stoi(words[0]) != static_cast<int>(nodes.size())) {
                        throw fail("node indices must be consecutive from 0");
                    }
                    nodes.push_back({std::stod(words[1]), dim == 2 ? std::stod(words[2]) : 0.0});
                    break;
                }
                case Section::Elements: {
                    if (static_cast<int>(words.size()) != dim + 1) throw fail("wrong node count for element");
                    std::array<int, 3> el{-1, -1, -1};
                    for (int k = 0; k <= dim; ++k) el[static_cast<std::size_t>(k)] = std::stoi(words[static_cast<std::size_t>(k)]);
                    if (signed_volume(dim, nodes, el) < 0.0) std::swap(el[0], el[1]);
                    elements.push_back(el);
                    break;
                }
                case Section::Facets: {
                    if (static_cast<int>(words.size()) != dim + 1) throw fail("expected facet nodes and a label");
                    BoundaryFacet facet;
                    for (int k = 0; k < dim; ++k) facet.nodes[static_cast<std::size_t>(k)] = std::stoi(words[static_cast<std::size_t>(k)]);
                    facet.label = words.back();
                    const auto it = labels.find(facet.label);
                    if (it == labels.end()) throw fail(fmt::format("facet label '{}' is not mapped to a boundary part", facet.label));
                    facet.tag = it->second;
                    facets.push_back(facet);
                    break;
                }
            }
        } catch (const std::logic_error&) {  // stoi/stod failures
            throw fail("malformed number");
        }
    }
    if (dim == 0) throw ParseError("mesh file: no NODES section", 0, 0);
    return Mesh(dim, std::move(nodes), std::move(elements), std::move(facets));
}

Mesh load_mesh(const std::filesystem::path& path, const SideTags& labels) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(fmt::format("cannot open mesh file '{}'", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return read_mesh(buffer.str(), labels);
}

}  // namespace dnpvi
