// Radial map: dots with decision glyphs, agent trails, draggable pointers.
// Pointer motion is event-driven; a drag only posts a Path intervention and
// the pointer snaps when the matching ArticleRead arrives, never before.

import { agentColor, clusterColor } from './colors.js';
import { SessionState } from './state.js';

export interface Surface {
    width: number;
    height: number;
    clear(): void;
    circle(x: number, y: number, r: number, fill: string, stroke?: string): void;
    polyline(points: Array<[number, number]>, color: string): void;
    text(value: string, x: number, y: number): void;
}

export interface DragResult {
    posted: { agentId: string; article: string } | null;
    bounced: boolean;
}

const DOT_RADIUS = 4;
const POINTER_RADIUS = 7;
const HIT_RADIUS = 8;
const GLYPH_STROKE: Record<string, string> = {
    unread: '#999999',
    included: '#1a7f1a',
    excluded: '#c02020',
};

export class MapView {
    private dragging: string | null = null;
    onHover: ((articleId: string | null) => void) | null = null;

    constructor(
        private readonly state: SessionState,
        private readonly surface: Surface,
        private readonly postPath: (agentId: string, article: string) => Promise<unknown>,
    ) {}

    private scale(): number {
        return (Math.min(this.surface.width, this.surface.height) / 2) * 0.92;
    }

    toScreen(x: number, y: number): [number, number] {
        const s = this.scale();
        return [this.surface.width / 2 + x * s, this.surface.height / 2 - y * s];
    }

    render(): { dotCount: number } {
        this.surface.clear();
        let dotCount = 0;
        for (const dot of this.state.dots.values()) {
            const [sx, sy] = this.toScreen(dot.x, dot.y);
            const glyph = this.state.glyphs.get(dot.id) ?? 'unread';
            this.surface.circle(sx, sy, DOT_RADIUS, clusterColor(dot.cluster), GLYPH_STROKE[glyph]);
            dotCount += 1;
        }
        for (const agentId of this.state.agents()) {
            const color = agentColor(agentId);
            const trail = this.state.trailPositions(agentId).map(([x, y]) => this.toScreen(x, y));
            if (trail.length > 1) this.surface.polyline(trail, color);
            const pointer = this.state.pointerPosition(agentId);
            if (pointer) {
                const [sx, sy] = this.toScreen(pointer[0], pointer[1]);
                this.surface.circle(sx, sy, POINTER_RADIUS, color, '#000000');
                this.surface.text(agentId.replace('agent-', 'A'), sx + 8, sy - 8);
            }
        }
        return { dotCount };
    }

    /** Nearest dot within the hit radius, ties by id for determinism. */
    hitTestDot(sx: number, sy: number): string | null {
        let best: { id: string; d: number } | null = null;
        for (const dot of this.state.dots.values()) {
            const [dx, dy] = this.toScreen(dot.x, dot.y);
            const d = Math.hypot(dx - sx, dy - sy);
            if (d > HIT_RADIUS) continue;
            if (!best || d < best.d || (d === best.d && dot.id < best.id)) {
                best = { id: dot.id, d };
            }
        }
        return best?.id ?? null;
    }

    hitTestPointer(sx: number, sy: number): string | null {
        for (const agentId of this.state.agents()) {
            const pointer = this.state.pointerPosition(agentId);
            if (!pointer) continue;
            const [px, py] = this.toScreen(pointer[0], pointer[1]);
            if (Math.hypot(px - sx, py - sy) <= HIT_RADIUS + POINTER_RADIUS) return agentId;
        }
        return null;
    }

    pointerDown(sx: number, sy: number): void {
        this.dragging = this.hitTestPointer(sx, sy);
        if (this.dragging === null && this.onHover) {
            this.onHover(this.hitTestDot(sx, sy));
        }
    }

    /** Drop onto a dot posts exactly one Path intervention; empty space bounces. */
    async pointerUp(sx: number, sy: number): Promise<DragResult> {
        const agentId = this.dragging;
        this.dragging = null;
        if (agentId === null) return { posted: null, bounced: false };
        const target = this.hitTestDot(sx, sy);
        if (target === null) return { posted: null, bounced: true };
        await this.postPath(agentId, target);
        return { posted: { agentId, article: target }, bounced: false };
    }
}
