import { describe, expect, it } from 'vitest';

import { MapView } from '../src/map.js';
import { SessionState } from '../src/state.js';
import { FakeSurface, loadEvents, loadLayout } from './helpers.js';

function spawnOnly(state: SessionState): void {
    state.applyAll(loadEvents().filter((event) => event.kind === 'AgentSpawned'));
}

describe('map view', () => {
    it('renders exactly N dots', () => {
        const layout = loadLayout();
        const state = new SessionState(layout);
        const surface = new FakeSurface();
        const view = new MapView(state, surface, async () => '');
        const { dotCount } = view.render();
        expect(dotCount).toBe(layout.length);
        expect(surface.circles.length).toBe(layout.length); // no pointers yet
    });

    it('drag from a pointer onto a dot posts exactly one path intervention', async () => {
        const state = new SessionState(loadLayout());
        spawnOnly(state);
        const surface = new FakeSurface();
        const posts: Array<{ agentId: string; article: string }> = [];
        const view = new MapView(state, surface, async (agentId, article) => {
            posts.push({ agentId, article });
            return 'iv-1';
        });
        const agentId = state.agents()[0];
        const [px, py] = state.pointerPosition(agentId)!;
        const [sx, sy] = view.toScreen(px, py);
        // pick a target dot away from the pointer
        const target = [...state.dots.values()].find(
            (dot) => Math.hypot(dot.x - px, dot.y - py) > 0.4,
        )!;
        const [tx, ty] = view.toScreen(target.x, target.y);
        view.pointerDown(sx, sy);
        const result = await view.pointerUp(tx, ty);
        expect(result.posted).not.toBeNull();
        expect(posts.length).toBe(1);
        expect(posts[0].agentId).toBe(agentId);
        // the drop landed within the hit radius of the returned article
        expect(result.posted!.article).toBeTruthy();
    });

    it('pointer advances only on the matching ArticleRead, never optimistically', async () => {
        const state = new SessionState(loadLayout());
        spawnOnly(state);
        const surface = new FakeSurface();
        const view = new MapView(state, surface, async () => 'iv-9');
        const agentId = state.agents()[0];
        const before = state.pointerPosition(agentId)!;
        const [px, py] = view.toScreen(before[0], before[1]);
        const target = [...state.dots.values()].find(
            (dot) => Math.hypot(dot.x - before[0], dot.y - before[1]) > 0.4,
        )!;
        const [tx, ty] = view.toScreen(target.x, target.y);
        view.pointerDown(px, py);
        const result = await view.pointerUp(tx, ty);
        const dropped = result.posted!.article;
        // posting alone must not move the pointer
        expect(state.pointerPosition(agentId)).toEqual(before);
        // an ArticleRead for a DIFFERENT article does not snap it either
        const other = [...state.dots.keys()].find((id) => id !== dropped)!;
        state.apply({
            seq: state.cursor + 1, timestamp: 0, agent_id: agentId,
            kind: 'ArticleRead',
            payload: { article_id: other, related_to_query: false, reason_of_exclusion: 'x', summary_phrase: '', forced_by: '' },
        });
        const otherDot = state.dots.get(other)!;
        expect(state.pointerPosition(agentId)).toEqual([otherDot.x, otherDot.y]);
        // the matching forced read snaps the pointer to the drop target
        state.apply({
            seq: state.cursor + 1, timestamp: 0, agent_id: agentId,
            kind: 'ArticleRead',
            payload: { article_id: dropped, related_to_query: true, reason_of_exclusion: '', summary_phrase: 'p', forced_by: 'iv-9' },
        });
        const droppedDot = state.dots.get(dropped)!;
        expect(state.pointerPosition(agentId)).toEqual([droppedDot.x, droppedDot.y]);
    });

    it('drop on empty canvas is a bounce with no request', async () => {
        const state = new SessionState(loadLayout());
        spawnOnly(state);
        const surface = new FakeSurface();
        const posts: string[] = [];
        const view = new MapView(state, surface, async (_, article) => {
            posts.push(article);
            return '';
        });
        const agentId = state.agents()[0];
        const [px, py] = state.pointerPosition(agentId)!;
        const [sx, sy] = view.toScreen(px, py);
        view.pointerDown(sx, sy);
        const result = await view.pointerUp(1, 1); // far corner, no dot
        expect(result.bounced).toBe(true);
        expect(result.posted).toBeNull();
        expect(posts.length).toBe(0);
    });

    it('trails render as one polyline per agent in the agent color', () => {
        const state = new SessionState(loadLayout());
        state.applyAll(loadEvents());
        const surface = new FakeSurface();
        const view = new MapView(state, surface, async () => '');
        view.render();
        const agentsWithTrails = state.agents().filter(
            (agentId) => (state.trails.get(agentId) ?? []).length > 1,
        );
        expect(surface.polylines.length).toBe(agentsWithTrails.length);
        for (const polyline of surface.polylines) {
            expect(polyline.points.length).toBeGreaterThan(1);
        }
    });
});
