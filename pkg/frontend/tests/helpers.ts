import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { Surface } from '../src/map.js';
import { LayoutDot, ProvenanceNode, SessionEvent } from '../src/types.js';

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), '..', 'fixtures');

export function loadLayout(): LayoutDot[] {
    return JSON.parse(readFileSync(join(FIXTURES, 'layout.json'), 'utf-8'));
}

export function loadEvents(): SessionEvent[] {
    return readFileSync(join(FIXTURES, 'events.jsonl'), 'utf-8')
        .trim()
        .split('\n')
        .map((line) => JSON.parse(line));
}

export function loadProvenance(): ProvenanceNode[] {
    return JSON.parse(readFileSync(join(FIXTURES, 'provenance.json'), 'utf-8'));
}

export function loadExportCsv(): string {
    return readFileSync(join(FIXTURES, 'export.csv'), 'utf-8');
}

export class FakeSurface implements Surface {
    width = 600;
    height = 600;
    circles: Array<{ x: number; y: number; r: number; fill: string; stroke?: string }> = [];
    polylines: Array<{ points: Array<[number, number]>; color: string }> = [];
    texts: Array<{ value: string; x: number; y: number }> = [];

    clear(): void {
        this.circles = [];
        this.polylines = [];
        this.texts = [];
    }

    circle(x: number, y: number, r: number, fill: string, stroke?: string): void {
        this.circles.push({ x, y, r, fill, stroke });
    }

    polyline(points: Array<[number, number]>, color: string): void {
        this.polylines.push({ points, color });
    }

    text(value: string, x: number, y: number): void {
        this.texts.push({ value, x, y });
    }
}

/** fetch stub driven by a route table: path suffix -> body (string or JSON). */
export function fakeFetch(
    routes: Record<string, string | object>,
    log: Array<{ url: string; init?: RequestInit }> = [],
): typeof fetch {
    return (async (url: any, init?: RequestInit) => {
        log.push({ url: String(url), init });
        for (const [suffix, body] of Object.entries(routes)) {
            if (String(url).includes(suffix)) {
                const text = typeof body === 'string' ? body : JSON.stringify(body);
                return new Response(text, { status: 200 });
            }
        }
        return new Response('{"error": "NotFound"}', { status: 404 });
    }) as typeof fetch;
}
