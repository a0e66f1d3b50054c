#include "rspt/agent.hpp"

#include "rspt/sensor.hpp"

namespace rspt {

namespace {

constexpr Scalar kContactMargin = 1e-6;

/// First contact distance of a point moving along a unit direction with a
/// circle, infinity if the segment never reaches it.
Scalar contact_distance(const Vec2& origin, const Vec2& dir, const Circle& c) {
    const Vec2 oc = origin - c.center;
    const Scalar b = oc.dot(dir);
    const Scalar c0 = oc.squaredNorm() - c.radius * c.radius;
    if (c0 <= 0) return 0;  // already inside the inflated shape
    const Scalar disc = b * b - c0;
    if (disc < 0) return std::numeric_limits<Scalar>::infinity();
    const Scalar t = -b - std::sqrt(disc);
    return t >= 0 ? t : std::numeric_limits<Scalar>::infinity();
}

Scalar aabb_entry(const Vec2& origin, const Vec2& dir, const Vec2& lo, const Vec2& hi) {
    Scalar t_in = 0, t_out = std::numeric_limits<Scalar>::infinity();
    bool inside = true;
    for (int ax = 0; ax < 2; ++ax) {
        if (origin[ax] < lo[ax] || origin[ax] > hi[ax]) inside = false;
        if (std::abs(dir[ax]) < 1e-15) {
            if (origin[ax] < lo[ax] || origin[ax] > hi[ax])
                return std::numeric_limits<Scalar>::infinity();
            continue;
        }
        Scalar t1 = (lo[ax] - origin[ax]) / dir[ax];
        Scalar t2 = (hi[ax] - origin[ax]) / dir[ax];
        if (t1 > t2) std::swap(t1, t2);
        t_in = std::max(t_in, t1);
        t_out = std::min(t_out, t2);
    }
    if (inside) return 0;
    if (t_in > t_out || t_out < 0) return std::numeric_limits<Scalar>::infinity();
    return t_in;
}

/// First contact with a rectangle inflated by r (Minkowski sum: two expanded
/// rectangles plus four corner circles).
Scalar contact_distance(const Vec2& origin, const Vec2& dir, const AARect& rect, Scalar r) {
    Scalar t = aabb_entry(origin, dir, rect.center - rect.half - Vec2(r, 0),
                          rect.center + rect.half + Vec2(r, 0));
    t = std::min(t, aabb_entry(origin, dir, rect.center - rect.half - Vec2(0, r),
                               rect.center + rect.half + Vec2(0, r)));
    for (int sx = -1; sx <= 1; sx += 2) {
        for (int sy = -1; sy <= 1; sy += 2) {
            const Vec2 corner = rect.center + Vec2(sx * rect.half.x(), sy * rect.half.y());
            t = std::min(t, contact_distance(origin, dir, Circle{corner, r}));
        }
    }
    return t;
}

}  // namespace

AgentState step_agent(const World& world, const AgentState& state, Action action,
                      std::span<const Circle> extra_bodies) {
    int turn = 0, move = 0;
    switch (action) {
        case Action::MoveForward: move = 1; break;
        case Action::TurnLeft: turn = 1; break;
        case Action::TurnLeftForward: turn = 1; move = 1; break;
        case Action::TurnRight: turn = -1; break;
        case Action::TurnRightForward: turn = -1; move = 1; break;
        case Action::Stop: break;
        case Action::MoveBackward: move = -1; break;
    }

    AgentState next = state;
    next.pose = Pose2(state.pose.x, state.pose.y,
                      state.pose.heading + turn * state.turn_rate);
    if (move == 0) return next;

    const Vec2 origin = next.pose.position();
    const Vec2 dir = static_cast<Scalar>(move) * next.pose.forward();
    Scalar advance = state.move_speed;

    // Walls: stay inside bounds deflated by the body radius.
    for (int ax = 0; ax < 2; ++ax) {
        if (dir[ax] > 1e-15) {
            advance = std::min(advance,
                               (world.bounds.max[ax] - state.radius - origin[ax]) / dir[ax]);
        } else if (dir[ax] < -1e-15) {
            advance = std::min(advance,
                               (world.bounds.min[ax] + state.radius - origin[ax]) / dir[ax]);
        }
    }
    for (const auto& o : world.obstacles) {
        if (const auto* c = std::get_if<Circle>(&o.shape)) {
            advance = std::min(advance, contact_distance(origin, dir,
                                                         Circle{c->center, c->radius + state.radius}));
        } else {
            advance = std::min(advance, contact_distance(origin, dir,
                                                         std::get<AARect>(o.shape), state.radius));
        }
    }
    for (const auto& body : extra_bodies) {
        advance = std::min(advance,
                           contact_distance(origin, dir,
                                            Circle{body.center, body.radius + state.radius}));
    }

    if (advance < state.move_speed) advance -= kContactMargin;
    advance = std::max(advance, Scalar(0));
    const Vec2 p = origin + advance * dir;
    next.pose = Pose2(p.x(), p.y(), next.pose.heading);
    return next;
}

}  // namespace rspt
