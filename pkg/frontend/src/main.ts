// Page wiring: one event cursor feeds the map, chat, hierarchy, and table.

import { ApiClient } from './api.js';
import { ChatPanel } from './chat.js';
import { HierarchyView } from './hierarchy.js';
import { InstructEditor } from './instruct.js';
import { MapView, Surface } from './map.js';
import { SessionState } from './state.js';
import { CorpusTable } from './table.js';
import { AgentConfigFields } from './types.js';

function canvasSurface(canvas: HTMLCanvasElement): Surface {
    const context = canvas.getContext('2d')!;
    return {
        get width() {
            return canvas.width;
        },
        get height() {
            return canvas.height;
        },
        clear() {
            context.clearRect(0, 0, canvas.width, canvas.height);
        },
        circle(x, y, r, fill, stroke) {
            context.beginPath();
            context.arc(x, y, r, 0, 2 * Math.PI);
            context.fillStyle = fill;
            context.fill();
            if (stroke) {
                context.strokeStyle = stroke;
                context.lineWidth = 1.5;
                context.stroke();
            }
        },
        polyline(points, color) {
            if (points.length < 2) return;
            context.beginPath();
            context.moveTo(points[0][0], points[0][1]);
            for (const [x, y] of points.slice(1)) context.lineTo(x, y);
            context.strokeStyle = color;
            context.lineWidth = 2;
            context.stroke();
        },
        text(value, x, y) {
            context.fillStyle = '#333';
            context.font = '11px sans-serif';
            context.fillText(value, x, y);
        },
    };
}

function element<T extends HTMLElement>(id: string): T {
    return document.getElementById(id) as T;
}

async function boot(): Promise<void> {
    const params = new URLSearchParams(window.location.search);
    const base = params.get('api') ?? '';
    const sessionId = params.get('session');
    if (!sessionId) {
        element<HTMLDivElement>('status').textContent =
            'Pass ?session=<id> (and optionally &api=<base-url>) to attach to a session.';
        return;
    }
    const api = new ApiClient(base);
    const layout = await api.layout(sessionId);
    const state = new SessionState(layout);
    const canvas = element<HTMLCanvasElement>('map');
    const mapView = new MapView(state, canvasSurface(canvas), (agentId, article) =>
        api.postIntervention(sessionId, agentId, { kind: 'path', target_article: article }),
    );
    const chat = new ChatPanel(state, api, sessionId);
    const instruct = new InstructEditor(state, api, sessionId);
    const table = new CorpusTable(state, api, sessionId);
    const hierarchy = new HierarchyView(state);
    let selectedAgent = '';

    const statusLine = element<HTMLDivElement>('status');
    const redraw = () => {
        const { dotCount } = mapView.render();
        statusLine.textContent =
            `phase ${state.phase} · ${dotCount} articles · cursor ${state.cursor}` +
            (chat.lastError ? ` · ${chat.lastError}` : '');
        renderAgents();
        renderChat();
        renderHierarchy();
        renderTable();
    };

    const renderAgents = () => {
        const select = element<HTMLSelectElement>('agent-select');
        const agents = state.agents();
        if (select.options.length !== agents.length) {
            select.innerHTML = '';
            for (const agentId of agents) {
                const option = document.createElement('option');
                option.value = agentId;
                option.textContent = agentId;
                select.appendChild(option);
            }
        }
        if (!selectedAgent && agents.length) selectedAgent = agents[0];
        select.value = selectedAgent;
        const config = instruct.fields(selectedAgent);
        if (config) {
            for (const key of Object.keys(config) as Array<keyof AgentConfigFields>) {
                const input = element<HTMLTextAreaElement>(`field-${key}`);
                if (document.activeElement !== input) input.value = config[key];
            }
        }
    };

    const renderChat = () => {
        const log = element<HTMLDivElement>('chat-log');
        log.innerHTML = '';
        for (const message of chat.messages(selectedAgent)) {
            const row = document.createElement('div');
            row.className = `msg ${message.speaker}`;
            row.textContent = `${message.speaker}: ${message.text}`;
            log.appendChild(row);
        }
        element<HTMLSpanElement>('badge').textContent = String(chat.pendingBadge(selectedAgent));
        log.scrollTop = log.scrollHeight;
    };

    const renderHierarchy = () => {
        const container = element<HTMLDivElement>('hierarchy');
        container.innerHTML = '';
        for (const row of hierarchy.rows()) {
            const div = document.createElement('div');
            div.style.paddingLeft = `${row.depth * 16}px`;
            div.style.borderLeft = `3px solid ${row.color}`;
            div.className = 'node';
            const arrow = row.expandable ? (row.expanded ? '▾ ' : '▸ ') : '· ';
            div.textContent = `${arrow}${row.node.kind} ${row.node.node_id}` +
                (row.node.source_article ? ` (${row.node.source_article})` : '');
            div.title = row.node.text.slice(0, 400);
            div.onclick = () => {
                hierarchy.toggle(row.node.node_id);
                renderHierarchy();
            };
            container.appendChild(div);
        }
        element<HTMLSpanElement>('node-count').textContent = String(hierarchy.nodeCount());
    };

    const renderTable = () => {
        const body = element<HTMLTableSectionElement>('table-body');
        body.innerHTML = '';
        for (const row of table.rows().slice(0, 500)) {
            const tr = document.createElement('tr');
            for (const value of [
                row.id, row.cluster, row.agent_id, row.read_state, row.decision, row.summary_phrase,
            ]) {
                const td = document.createElement('td');
                td.textContent = String(value);
                tr.appendChild(td);
            }
            body.appendChild(tr);
        }
    };

    canvas.addEventListener('pointermove', (event) => {
        const rect = canvas.getBoundingClientRect();
        const hit = mapView.hitTestDot(event.clientX - rect.left, event.clientY - rect.top);
        if (hit) {
            const row = table.rows().find((r) => r.id === hit);
            canvas.title = row
                ? `${hit}: ${row.title || '(no title in layout export)'} — ${row.decision}`
                : hit;
        } else {
            canvas.title = '';
        }
    });
    canvas.addEventListener('pointerdown', (event) => {
        const rect = canvas.getBoundingClientRect();
        mapView.pointerDown(event.clientX - rect.left, event.clientY - rect.top);
    });
    canvas.addEventListener('pointerup', async (event) => {
        const rect = canvas.getBoundingClientRect();
        await mapView.pointerUp(event.clientX - rect.left, event.clientY - rect.top);
        redraw();
    });
    element<HTMLSelectElement>('agent-select').addEventListener('change', (event) => {
        selectedAgent = (event.target as HTMLSelectElement).value;
        redraw();
    });
    element<HTMLButtonElement>('chat-send').addEventListener('click', async () => {
        const input = element<HTMLInputElement>('chat-input');
        if (input.value.trim()) {
            await chat.send(selectedAgent, input.value.trim());
            input.value = '';
            redraw();
        }
    });
    element<HTMLButtonElement>('instruct-save').addEventListener('click', async () => {
        const edited = {} as AgentConfigFields;
        for (const key of [
            'research_question', 'detailed_focus',
            'inclusion_exclusion_criteria', 'summarization_requirement',
        ] as Array<keyof AgentConfigFields>) {
            edited[key] = element<HTMLTextAreaElement>(`field-${key}`).value;
        }
        await instruct.save(selectedAgent, edited);
        redraw();
    });
    element<HTMLButtonElement>('download').addEventListener('click', async () => {
        const csv = await table.downloadCsv();
        const blob = new Blob([csv], { type: 'text/csv' });
        const link = document.createElement('a');
        link.href = URL.createObjectURL(blob);
        link.download = 'corpus-export.csv';
        link.click();
    });
    element<HTMLInputElement>('filter').addEventListener('input', (event) => {
        table.filterText = (event.target as HTMLInputElement).value;
        renderTable();
    });

    redraw();
    // Tail the stream with reconnection; the cursor makes resumes gap-free.
    for (;;) {
        try {
            await api.streamEvents(sessionId, state.cursor, (event) => {
                state.apply(event);
                redraw();
            });
            break; // server signaled end-of-session
        } catch {
            statusLine.textContent = `stream disconnected, reconnecting from ${state.cursor}…`;
            await new Promise((resolve) => setTimeout(resolve, 1000));
        }
    }
}

boot();
